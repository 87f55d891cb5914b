"""Shared helpers: hand-built graphs, dict-backed providers, stub objectives."""

from __future__ import annotations

import numpy as np
import pytest

from routefront.expansion import ReactionRecord
from routefront.graph import SearchGraph
from routefront.objectives import CostVector, MoleculeProperties


class StubObjectives:
    """Objective set with per-rule fixed costs, for hand-built worlds.

    Cost vectors are keyed by rule_id; heuristics default to zero. The last
    dimension plays the guidance role unless a full mask is requested.
    """

    def __init__(self, costs: dict[str, tuple], dim: int | None = None, full_mask: bool = False):
        self.costs = {k: np.asarray(v, dtype=float) for k, v in costs.items()}
        self.dim = dim if dim is not None else len(next(iter(self.costs.values())))
        self.guidance_index = self.dim - 1
        self._full_mask = full_mask

    @property
    def pareto_mask(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        if not self._full_mask:
            mask[self.guidance_index] = False
        return mask

    def reaction_cost(self, record) -> CostVector:
        return CostVector(self.costs[record.rule_id], self.pareto_mask)

    def molecule_heuristic(self, key, is_stock: bool = False) -> CostVector:
        return CostVector(np.zeros(self.dim), self.pareto_mask)


class DictProvider:
    """Expansion provider backed by explicit reaction lists."""

    def __init__(self, expansions: dict[str, list[ReactionRecord]], stock: set[str],
                 props: dict[str, MoleculeProperties] | None = None):
        self.expansions = expansions
        self.stock = stock
        self.props = props or {}

    def expand(self, molecule):
        return self.expansions.get(molecule, [])

    def in_stock(self, molecule):
        return molecule in self.stock

    def properties(self, molecule):
        return self.props[molecule]


def rxn(product: str, reactants, rule_id: str, **kwargs) -> ReactionRecord:
    return ReactionRecord(product=product, reactants=tuple(reactants), rule_id=rule_id, **kwargs)


def build_graph(target: str, expansions, stock: set[str], dim: int = 2,
                heuristics: dict[str, tuple] | None = None) -> SearchGraph:
    """Expand a hand-specified world breadth-first into a SearchGraph.

    ``expansions`` maps molecule key -> list of (reactants, cost) pairs.
    Molecules absent from both the map and the stock set stay on the
    frontier.
    """
    heuristics = heuristics or {}

    def info(key):
        heur = np.asarray(heuristics.get(key, np.zeros(dim)), dtype=float)
        return key in stock, heur

    is_stock, heur = info(target)
    graph = SearchGraph(target, is_stock, heur)
    queue = [target]
    seen = {target}
    counter = 0
    while queue:
        key = queue.pop(0)
        if key in stock or key not in expansions:
            continue
        candidates = []
        for reactants, cost in expansions[key]:
            record = rxn(key, reactants, rule_id=f"r{counter}")
            counter += 1
            candidates.append((record, np.asarray(cost, dtype=float)))
        graph.add_expansion(key, candidates, info)
        for reactants, _ in expansions[key]:
            for reactant in reactants:
                if reactant not in seen:
                    seen.add(reactant)
                    queue.append(reactant)
    return graph


def enumerate_partial_solutions(graph: SearchGraph, mol_id: int):
    """Brute-force reference: all partial solutions of the subtree at mol_id.

    A partial solution picks one child reaction per reached expanded
    molecule and terminates at stock or frontier leaves. Yields
    (estimate_vector, node_set) pairs where the estimate sums reaction costs
    plus leaf heuristics, mirroring what the propagation passes bound.
    Intended for trees (shared nodes would double-count) and tiny graphs.
    """
    if graph.is_stock(mol_id):
        return [(np.zeros(graph.dim), frozenset({mol_id}))]
    if not graph.is_expanded(mol_id):
        return [(graph.heuristic_matrix()[mol_id].copy(), frozenset({mol_id}))]
    solutions = []
    for rid in graph._mol_children[mol_id]:
        child_solutions = [enumerate_partial_solutions(graph, m) for m in graph._rxn_reactants[rid]]
        stack = [(graph.reaction_cost(rid).copy(), frozenset({mol_id}))]
        for options in child_solutions:
            stack = [
                (value + child_value, nodes | child_nodes)
                for value, nodes in stack
                for child_value, child_nodes in options
            ]
        solutions.extend(stack)
    if not solutions:
        return [(np.full(graph.dim, np.inf), frozenset({mol_id}))]
    return solutions


@pytest.fixture
def diamond_graph():
    """Two alternative single-reaction routes plus a two-step branch."""
    expansions = {
        "T": [(("A",), (0.1, 0.2)), (("B",), (0.3, 0.1)), (("C",), (0.2, 0.2))],
        "C": [(("S1", "S2"), (0.1, 0.1))],
    }
    return build_graph("T", expansions, stock={"A", "B", "S1", "S2"})
