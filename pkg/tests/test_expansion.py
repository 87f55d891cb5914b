"""Provider behavior: synthetic worlds and template tables."""

from __future__ import annotations

import json

import pytest

from routefront.expansion import (
    ReactionRecord,
    SyntheticWorld,
    TemplateParseError,
    TemplateTableProvider,
    UnknownMoleculeError,
    WorldSpec,
    load_stock_file,
)


def walk_world(world: SyntheticWorld, max_nodes: int = 50_000):
    """Full traversal; returns {molecule: depth} and all records seen."""
    seen = {world.target: 0}
    queue = [world.target]
    records = []
    while queue:
        mol = queue.pop(0)
        if world.in_stock(mol):
            continue
        for record in world.expand(mol):
            records.append(record)
            for reactant in record.reactants:
                if reactant not in seen:
                    seen[reactant] = world.depth_of(reactant)
                    queue.append(reactant)
        assert len(seen) < max_nodes, "world traversal blew up"
    return seen, records


class TestSyntheticWorld:
    def test_exact_branching_at_root(self):
        world = SyntheticWorld(WorldSpec(seed=7, branching=3))
        assert len(world.expand("T0")) == 3

    def test_depth_one_forces_stock_reactants(self):
        world = SyntheticWorld(WorldSpec(seed=3, depth_max=1, branching=2))
        for record in world.expand("T0"):
            assert all(world.in_stock(r) for r in record.reactants)

    def test_deterministic_reexpansion(self):
        world = SyntheticWorld(WorldSpec(seed=11, depth_max=3))
        assert world.expand("T0") == world.expand("T0")

    def test_two_full_enumerations_identical(self):
        spec = WorldSpec(seed=5, depth_max=3, branching=2)
        seen_a, records_a = walk_world(SyntheticWorld(spec))
        seen_b, records_b = walk_world(SyntheticWorld(spec))
        assert seen_a == seen_b
        assert records_a == records_b

    def test_children_strictly_deeper(self):
        world = SyntheticWorld(WorldSpec(seed=9, depth_max=4))
        seen, records = walk_world(world)
        for record in records:
            parent_depth = seen[record.product]
            for reactant in record.reactants:
                assert seen[reactant] == parent_depth + 1

    def test_acyclic_and_solvable_by_construction(self):
        # strictly-deeper children rule out cycles; depth_max forces stock,
        # so every molecule reaches stock
        world = SyntheticWorld(WorldSpec(seed=13, depth_max=4, branching=3))
        seen, _ = walk_world(world)
        assert all(depth <= world.spec.depth_max for depth in seen.values())
        deepest = [m for m, d in seen.items() if d == world.spec.depth_max]
        assert all(world.in_stock(m) for m in deepest)

    def test_unknown_molecule_rejected(self):
        world = SyntheticWorld(WorldSpec(seed=1))
        with pytest.raises(UnknownMoleculeError):
            world.expand("not-a-molecule")
        with pytest.raises(UnknownMoleculeError):
            world.properties("m2-no-such-digest!")

    def test_properties_deterministic_and_valid(self):
        world = SyntheticWorld(WorldSpec(seed=2, depth_max=2))
        _, records = walk_world(world)
        mol = records[0].reactants[0]
        props = world.properties(mol)
        assert props == world.properties(mol)
        assert props.heavy_atom_count >= 1
        assert 0.0 <= props.toxicity_score <= 1.0

    def test_spec_json_roundtrip(self):
        spec = WorldSpec(seed=4, depth_max=5, stock_ramp=0.2)
        assert WorldSpec.from_json(spec.to_json()) == spec

    def test_objective_costs_normalized(self):
        world = SyntheticWorld(WorldSpec(seed=21, depth_max=3))
        objectives = world.objective_set()
        _, records = walk_world(world)
        for record in records[:50]:
            values = objectives.reaction_cost(record).values
            assert (values >= 0).all() and (values <= 1).all()


def write_template(tmp_path, rows):
    path = tmp_path / "templates.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def write_stock(tmp_path, keys):
    path = tmp_path / "stock.txt"
    path.write_text("\n".join(keys) + "\n", encoding="utf-8")
    return path


class TestTemplateTable:
    def test_absent_product_gives_empty(self, tmp_path):
        provider = TemplateTableProvider.from_files(
            write_template(tmp_path, [{"product": "X", "reactants": ["a"], "prob": 0.5}]),
            write_stock(tmp_path, ["a"]),
        )
        assert provider.expand("unknown") == []

    def test_condition_variants_expand_to_records(self, tmp_path):
        rows = [{
            "product": "X", "reactants": ["a", "b"], "prob": 0.9, "rule_id": "t1",
            "conditions": [{"agents": ["water"], "temp": 25.0}, {"agents": [], "temp": 80.0}],
        }]
        provider = TemplateTableProvider.from_files(
            write_template(tmp_path, rows), write_stock(tmp_path, ["a", "b"])
        )
        records = provider.expand("X")
        assert len(records) == 2
        assert records[0].reactants == records[1].reactants == ("a", "b")
        assert {r.temperature for r in records} == {25.0, 80.0}

    def test_truncated_to_max_candidates(self, tmp_path):
        rows = [
            {"product": "X", "reactants": [f"r{i}"], "prob": (i + 1) / 50.0, "rule_id": f"t{i}"}
            for i in range(30)
        ]
        provider = TemplateTableProvider.from_files(
            write_template(tmp_path, rows), write_stock(tmp_path, ["a"]), max_candidates=25
        )
        records = provider.expand("X")
        assert len(records) == 25

    def test_descending_probability_order(self, tmp_path):
        rows = [
            {"product": "X", "reactants": ["a"], "prob": 0.2, "rule_id": "low"},
            {"product": "X", "reactants": ["b"], "prob": 0.9, "rule_id": "high"},
        ]
        provider = TemplateTableProvider.from_files(
            write_template(tmp_path, rows), write_stock(tmp_path, ["a", "b"])
        )
        assert [r.rule_id for r in provider.expand("X")] == ["high", "low"]

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"product": "X", "reactants": ["a"], "prob": 0.5}\nnot json\n', encoding="utf-8")
        with pytest.raises(TemplateParseError, match="line 2"):
            TemplateTableProvider.from_files(path, write_stock(tmp_path, ["a"]))

    def test_missing_field_rejected(self, tmp_path):
        with pytest.raises(TemplateParseError, match="prob"):
            TemplateTableProvider.from_files(
                write_template(tmp_path, [{"product": "X", "reactants": ["a"]}]),
                write_stock(tmp_path, ["a"]),
            )

    def test_stock_file(self, tmp_path):
        stock = load_stock_file(write_stock(tmp_path, ["a", "b", ""]))
        assert stock == {"a", "b"}


class TestReactionRecord:
    def test_empty_reactants_rejected(self):
        with pytest.raises(ValueError):
            ReactionRecord("X", ())

    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            ReactionRecord("X", ("a",), probability=0.0)
        with pytest.raises(ValueError):
            ReactionRecord("X", ("a",), probability=1.2)
