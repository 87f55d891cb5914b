"""AND-OR search graph over molecule and reaction nodes.

Molecules are OR nodes (one child reaction must be solved) and reactions
are AND nodes (all reactant children must be solved). The graph is kept
acyclic under molecule merging by discarding candidate reactions whose
reactants sit on an ancestor path of their product.

Nodes live in an arena addressed by integer handles and are stratified
into depth levels, so value propagation runs as a handful of vectorized
numpy passes per level instead of per-node Python loops. The same two
passes serve both the scalarized search values (one column per active
weight) and the vector-valued pruning bounds (one column per objective).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expansion import ReactionRecord


class ContractError(RuntimeError):
    """A caller broke one of the graph's preconditions."""


def record_sort_key(record: ReactionRecord) -> tuple:
    """Canonical ordering key for a reaction record.

    Route costs are summed in this order everywhere (search extraction,
    in-graph enumeration, oracle), so the same reaction set always yields
    bit-identical cost vectors and dominance decisions agree across
    independently computed fronts.
    """
    return (
        record.product,
        record.rule_id,
        tuple(sorted(record.reactants)),
        record.temperature,
        record.probability,
        tuple(sorted(record.agents)),
    )


@dataclass(frozen=True, eq=False)
class RouteStep:
    """One reaction of a route, materialized independently of the graph."""

    record: ReactionRecord
    cost: np.ndarray

    @property
    def signature(self) -> tuple:
        return (self.record.product, tuple(sorted(self.record.reactants)), self.record.rule_id)


@dataclass(frozen=True, eq=False)
class Route:
    """A solved subgraph from the target down to stock molecules."""

    target: str
    steps: tuple[RouteStep, ...]
    cost: np.ndarray
    frontier_leaves: frozenset[str]
    reaction_ids: tuple[int, ...]
    generating_weight: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def signature_set(self) -> frozenset[tuple]:
        return frozenset(step.signature for step in self.steps)


def validate_route(route: Route, in_stock) -> None:
    """Raise ValueError unless the route satisfies its structural invariants."""
    produced = [s.record.product for s in route.steps]
    if len(set(produced)) != len(produced):
        raise ValueError("route produces a molecule more than once")
    produced_set = set(produced)
    consumed = {r for s in route.steps for r in s.record.reactants}

    if route.steps and route.target not in produced_set:
        raise ValueError("route does not produce the target")
    if not route.steps and not in_stock(route.target):
        raise ValueError("empty route requires the target to be in stock")

    for mol in consumed:
        if mol in produced_set:
            continue
        if not in_stock(mol):
            raise ValueError(f"non-stock molecule {mol!r} consumed but never produced")
        if mol not in route.frontier_leaves:
            raise ValueError(f"stock leaf {mol!r} missing from frontier_leaves")
    for mol in route.frontier_leaves:
        if not in_stock(mol):
            raise ValueError(f"frontier leaf {mol!r} is not a stock molecule")

    if route.steps:
        total = np.add.reduce(np.stack([s.cost for s in route.steps]), axis=0)
        if not np.array_equal(total, route.cost):
            raise ValueError("route cost does not equal the sum of its step costs")
    if not route.steps and np.any(route.cost != 0):
        raise ValueError("empty route must have zero cost")


@dataclass
class ExpansionResult:
    new_molecules: list[int]
    new_reactions: list[int]
    discarded_cycles: int


class SearchGraph:
    """Arena-backed AND-OR DAG with level-vectorized value propagation.

    Single writer: all mutation (expansion, pruning marks) happens in the
    search loop's thread of control. The propagation passes only read the
    compiled structure and can run concurrently against a quiescent graph.
    """

    def __init__(self, target: str, is_stock: bool, heuristic: np.ndarray):
        self.dim = int(np.asarray(heuristic).shape[0])

        # molecule arena
        self._mol_keys: list[str] = []
        self._mol_index: dict[str, int] = {}
        self._mol_stock: list[bool] = []
        self._mol_expanded: list[bool] = []
        self._mol_pruned: list[bool] = []
        self._mol_heur: list[np.ndarray] = []
        self._mol_children: list[list[int]] = []   # child reaction ids
        self._mol_parents: list[list[int]] = []    # parent reaction ids
        self._mol_level: list[int] = []

        # reaction arena
        self._rxn_product: list[int] = []
        self._rxn_reactants: list[list[int]] = []
        self._rxn_cost: list[np.ndarray] = []
        self._rxn_record: list[ReactionRecord] = []
        self._rxn_level: list[int] = []

        self.cycles_discarded = 0
        self._dirty = True

        self.target_id = self._new_molecule(target, is_stock, np.asarray(heuristic, dtype=float))

    # -- basic accessors -----------------------------------------------------

    @property
    def n_molecules(self) -> int:
        return len(self._mol_keys)

    @property
    def n_reactions(self) -> int:
        return len(self._rxn_product)

    def molecule_id(self, key: str) -> int:
        try:
            return self._mol_index[key]
        except KeyError:
            raise ContractError(f"molecule {key!r} is not in the graph") from None

    def molecule_key(self, mol_id: int) -> str:
        return self._mol_keys[mol_id]

    def is_stock(self, mol_id: int) -> bool:
        return self._mol_stock[mol_id]

    def is_expanded(self, mol_id: int) -> bool:
        return self._mol_expanded[mol_id]

    def is_pruned(self, mol_id: int) -> bool:
        return self._mol_pruned[mol_id]

    def reaction_record(self, rxn_id: int) -> ReactionRecord:
        return self._rxn_record[rxn_id]

    def reaction_cost(self, rxn_id: int) -> np.ndarray:
        return self._rxn_cost[rxn_id]

    def molecule_keys(self) -> list[str]:
        return list(self._mol_keys)

    # -- construction ----------------------------------------------------------

    def _new_molecule(self, key: str, is_stock: bool, heuristic: np.ndarray) -> int:
        mol_id = len(self._mol_keys)
        self._mol_keys.append(key)
        self._mol_index[key] = mol_id
        self._mol_stock.append(is_stock)
        self._mol_expanded.append(False)
        self._mol_pruned.append(False)
        self._mol_heur.append(np.zeros(self.dim) if is_stock else np.asarray(heuristic, dtype=float))
        self._mol_children.append([])
        self._mol_parents.append([])
        self._mol_level.append(0)
        self._dirty = True
        return mol_id

    def _ancestors_of(self, mol_id: int) -> set[int]:
        """Molecule ids on any path from the root down to (and including) mol_id."""
        seen = {mol_id}
        stack = [mol_id]
        while stack:
            current = stack.pop()
            for rxn in self._mol_parents[current]:
                product = self._rxn_product[rxn]
                if product not in seen:
                    seen.add(product)
                    stack.append(product)
        return seen

    def _raise_mol_level(self, mol_id: int, level: int) -> None:
        if level <= self._mol_level[mol_id]:
            return
        self._mol_level[mol_id] = level
        for rxn in self._mol_children[mol_id]:
            self._raise_rxn_level(rxn, level + 1)

    def _raise_rxn_level(self, rxn_id: int, level: int) -> None:
        if level <= self._rxn_level[rxn_id]:
            return
        self._rxn_level[rxn_id] = level
        for mol in self._rxn_reactants[rxn_id]:
            self._raise_mol_level(mol, level + 1)

    def add_expansion(self, parent: int | str, candidates, molecule_info) -> ExpansionResult:
        """Attach candidate reactions under a frontier molecule.

        ``candidates`` is a sequence of ``(ReactionRecord, cost_row)`` pairs;
        ``molecule_info(key) -> (is_stock, heuristic_row)`` supplies metadata
        for reactants not yet in the graph. Candidates whose insertion would
        create a directed cycle (a reactant is the parent or one of its
        ancestors) are discarded and counted. The parent is marked expanded
        even when every candidate is discarded.
        """
        parent_id = self.molecule_id(parent) if isinstance(parent, str) else parent
        if self._mol_stock[parent_id]:
            raise ContractError(f"cannot expand stock molecule {self._mol_keys[parent_id]!r}")
        if self._mol_expanded[parent_id]:
            raise ContractError(f"molecule {self._mol_keys[parent_id]!r} is already expanded")
        if self._mol_pruned[parent_id]:
            raise ContractError(f"molecule {self._mol_keys[parent_id]!r} was pruned")

        ancestors = self._ancestors_of(parent_id)
        result = ExpansionResult([], [], 0)

        for record, cost in candidates:
            existing = [self._mol_index.get(r) for r in record.reactants]
            if any(mid is not None and mid in ancestors for mid in existing):
                result.discarded_cycles += 1
                self.cycles_discarded += 1
                continue

            rxn_id = len(self._rxn_product)
            rxn_level = self._mol_level[parent_id] + 1
            self._rxn_product.append(parent_id)
            self._rxn_reactants.append([])
            self._rxn_cost.append(np.asarray(cost, dtype=float))
            self._rxn_record.append(record)
            self._rxn_level.append(rxn_level)
            self._mol_children[parent_id].append(rxn_id)
            result.new_reactions.append(rxn_id)

            for key, mid in zip(record.reactants, existing):
                if mid is None:
                    is_stock, heuristic = molecule_info(key)
                    mid = self._new_molecule(key, is_stock, heuristic)
                    self._mol_level[mid] = rxn_level + 1
                    result.new_molecules.append(mid)
                else:
                    self._raise_mol_level(mid, rxn_level + 1)
                self._rxn_reactants[rxn_id].append(mid)
                self._mol_parents[mid].append(rxn_id)

        self._mol_expanded[parent_id] = True
        self._dirty = True
        return result

    def mark_pruned(self, mol_ids) -> None:
        for mid in mol_ids:
            self._mol_pruned[mid] = True
        if len(mol_ids):
            self._dirty = True

    # -- frontier ---------------------------------------------------------------

    def frontier_ids(self) -> np.ndarray:
        """Ids of non-pruned, non-stock, unexpanded molecules, ascending."""
        self._compile()
        open_mask = ~self._np_stock & ~self._np_expanded & ~self._np_pruned
        return np.nonzero(open_mask)[0]

    def frontier(self) -> set[str]:
        return {self._mol_keys[i] for i in self.frontier_ids()}

    # -- compiled level structure -------------------------------------------------

    def _compile(self) -> None:
        if not self._dirty:
            return
        n_mol, n_rxn = self.n_molecules, self.n_reactions
        self._np_stock = np.array(self._mol_stock, dtype=bool)
        self._np_expanded = np.array(self._mol_expanded, dtype=bool)
        self._np_pruned = np.array(self._mol_pruned, dtype=bool)
        self._np_heur = (
            np.stack(self._mol_heur) if n_mol else np.zeros((0, self.dim))
        )
        self._np_cost = np.stack(self._rxn_cost) if n_rxn else np.zeros((0, self.dim))
        self._np_product = np.array(self._rxn_product, dtype=np.int64)

        max_level = 0
        if n_mol:
            max_level = max(max_level, max(self._mol_level))
        if n_rxn:
            max_level = max(max_level, max(self._rxn_level))
        self._max_level = max_level

        rxn_bucket: dict[int, list[int]] = {}
        for rid in range(n_rxn):
            rxn_bucket.setdefault(self._rxn_level[rid], []).append(rid)
        mol_bucket: dict[int, list[int]] = {}
        for mid in range(n_mol):
            mol_bucket.setdefault(self._mol_level[mid], []).append(mid)

        def flatten(ids, adjacency):
            flat, ptr = [], [0]
            for i in ids:
                flat.extend(adjacency[i])
                ptr.append(len(flat))
            return np.array(flat, dtype=np.int64), np.array(ptr, dtype=np.int64)

        self._levels = []
        for level in range(max_level + 1):
            rids = np.array(rxn_bucket.get(level, []), dtype=np.int64)
            r_flat, r_ptr = flatten(rids, self._rxn_reactants)

            mols_here = mol_bucket.get(level, [])
            inner = [m for m in mols_here if self._mol_expanded[m] and self._mol_children[m]]
            inner_ids = np.array(inner, dtype=np.int64)
            m_flat, m_ptr = flatten(inner_ids, self._mol_children)

            nonroot = [m for m in mols_here if self._mol_parents[m]]
            nonroot_ids = np.array(nonroot, dtype=np.int64)
            p_flat, p_ptr = flatten(nonroot_ids, self._mol_parents)

            self._levels.append({
                "rxn": rids, "rxn_flat": r_flat, "rxn_ptr": r_ptr,
                "mol": inner_ids, "mol_flat": m_flat, "mol_ptr": m_ptr,
                "nonroot": nonroot_ids, "par_flat": p_flat, "par_ptr": p_ptr,
            })
        self._dirty = False

    # -- value propagation ----------------------------------------------------------

    def propagate_remaining(self, rxn_values: np.ndarray, leaf_values: np.ndarray):
        """Bottom-up pass: cheapest remaining completion cost below each node.

        ``rxn_values`` holds one projected cost row per reaction and
        ``leaf_values`` one row per molecule (used for unexpanded, non-stock
        leaves). Stock molecules cost zero; expanded molecules take the
        minimum over child reactions; a reaction sums its projected cost and
        its reactants. Dead ends (expanded, no surviving children) become
        +inf. Returns ``(mol_remaining, rxn_remaining)``.
        """
        self._compile()
        n_mol, n_rxn = self.n_molecules, self.n_reactions
        width = rxn_values.shape[1] if n_rxn else leaf_values.shape[1]

        mol_rem = np.full((n_mol, width), np.inf)
        mol_rem[self._np_stock] = 0.0
        leaf_mask = ~self._np_stock & ~self._np_expanded
        mol_rem[leaf_mask] = leaf_values[leaf_mask]
        rxn_rem = np.full((n_rxn, width), np.inf)

        for level in range(self._max_level, -1, -1):
            lv = self._levels[level]
            rids = lv["rxn"]
            if rids.size:
                sums = np.add.reduceat(mol_rem[lv["rxn_flat"]], lv["rxn_ptr"][:-1], axis=0)
                rxn_rem[rids] = rxn_values[rids] + sums
            mids = lv["mol"]
            if mids.size:
                mol_rem[mids] = np.minimum.reduceat(rxn_rem[lv["mol_flat"]], lv["mol_ptr"][:-1], axis=0)
        return mol_rem, rxn_rem

    def propagate_through(self, mol_rem: np.ndarray, rxn_rem: np.ndarray):
        """Top-down pass: cheapest full-route cost through each node.

        The root takes its remaining value; a reaction replaces its product's
        remaining value inside the product's through value; a molecule takes
        the minimum over its parents. Returns ``(mol_through, rxn_through)``.
        """
        self._compile()
        mol_thr = np.full_like(mol_rem, np.inf)
        rxn_thr = np.full_like(rxn_rem, np.inf)
        mol_thr[self.target_id] = mol_rem[self.target_id]

        for level in range(self._max_level + 1):
            lv = self._levels[level]
            rids = lv["rxn"]
            if rids.size:
                prods = self._np_product[rids]
                with np.errstate(invalid="ignore"):
                    values = rxn_rem[rids] - mol_rem[prods] + mol_thr[prods]
                values[np.isnan(values)] = np.inf
                rxn_thr[rids] = values
            mids = lv["nonroot"]
            if mids.size:
                mol_thr[mids] = np.minimum.reduceat(rxn_thr[lv["par_flat"]], lv["par_ptr"][:-1], axis=0)
        return mol_thr, rxn_thr

    def solved_masks(self):
        """Boolean masks: molecule solved (reaches stock), reaction solved (all reactants solved)."""
        self._compile()
        mol_solved = self._np_stock.astype(np.uint8)
        rxn_solved = np.zeros(self.n_reactions, dtype=np.uint8)
        for level in range(self._max_level, -1, -1):
            lv = self._levels[level]
            rids = lv["rxn"]
            if rids.size:
                rxn_solved[rids] = np.minimum.reduceat(mol_solved[lv["rxn_flat"]], lv["rxn_ptr"][:-1])
            mids = lv["mol"]
            if mids.size:
                mol_solved[mids] = np.maximum.reduceat(rxn_solved[lv["mol_flat"]], lv["mol_ptr"][:-1])
        return mol_solved.astype(bool), rxn_solved.astype(bool)

    def heuristic_matrix(self) -> np.ndarray:
        self._compile()
        return self._np_heur

    def cost_matrix(self) -> np.ndarray:
        self._compile()
        return self._np_cost

    # -- route extraction ----------------------------------------------------------

    def materialize_route(self, reaction_ids, weight: np.ndarray | None = None) -> Route:
        """Build a Route object from a set of in-graph reaction ids.

        Steps follow the canonical record order and the cost is reduced in
        that order, so equal reaction sets cost bit-identical vectors no
        matter where they were enumerated.
        """
        ids = tuple(sorted(
            (int(r) for r in reaction_ids),
            key=lambda r: (record_sort_key(self._rxn_record[r]), r),
        ))
        steps = tuple(RouteStep(self._rxn_record[r], self._rxn_cost[r]) for r in ids)
        if ids:
            cost = np.add.reduce(np.stack([self._rxn_cost[r] for r in ids]), axis=0)
        else:
            cost = np.zeros(self.dim)
        produced = {self._rxn_product[r] for r in ids}
        leaves = {
            self._mol_keys[m]
            for r in ids
            for m in self._rxn_reactants[r]
            if self._mol_stock[m] and m not in produced
        }
        if not ids and self._mol_stock[self.target_id]:
            leaves = {self._mol_keys[self.target_id]}
        return Route(
            target=self._mol_keys[self.target_id],
            steps=steps,
            cost=cost,
            frontier_leaves=frozenset(leaves),
            reaction_ids=ids,
            generating_weight=None if weight is None else np.asarray(weight, dtype=float),
        )

    def extract_best_route(
        self,
        rxn_remaining: np.ndarray,
        mol_solved: np.ndarray,
        rxn_solved: np.ndarray,
        weight: np.ndarray | None = None,
    ) -> Route | None:
        """Greedy descent from the target along minimal-remaining solved reactions.

        ``rxn_remaining`` is one scalar column; ties break on the smaller
        reaction id (insertion order). Returns None when the target is not
        solved; a stock target yields the empty route.
        """
        if not mol_solved[self.target_id]:
            return None
        chosen: list[int] = []
        visited: set[int] = set()
        stack = [self.target_id]
        while stack:
            mid = stack.pop()
            if mid in visited or self._mol_stock[mid]:
                continue
            visited.add(mid)
            best = None
            for rid in self._mol_children[mid]:
                if not rxn_solved[rid]:
                    continue
                if best is None or rxn_remaining[rid] < rxn_remaining[best]:
                    best = rid
            chosen.append(best)
            stack.extend(self._rxn_reactants[best])
        return self.materialize_route(chosen, weight)

    def enumerate_solved_routes(self, cap: int = 100_000):
        """All distinct complete routes embedded in the solved subgraph.

        Routes are reaction-id frozensets (shared sub-routes are counted
        once). Returns ``(route_sets, cap_hit)``; enumeration stops early
        when more than ``cap`` sets have been generated.
        """
        mol_solved, rxn_solved = self.solved_masks()
        memo: dict[int, list[frozenset[int]]] = {}
        budget = [cap]

        def routes_of(mid: int) -> list[frozenset[int]]:
            if self._mol_stock[mid]:
                return [frozenset()]
            cached = memo.get(mid)
            if cached is not None:
                return cached
            found: set[frozenset[int]] = set()
            for rid in self._mol_children[mid]:
                if not rxn_solved[rid]:
                    continue
                child_routes = [routes_of(m) for m in self._rxn_reactants[rid]]
                for combo in itertools.product(*child_routes):
                    if budget[0] <= 0:
                        break
                    merged = frozenset().union(*combo) | {rid}
                    # exactly one producing reaction per molecule in a route
                    if len({self._rxn_product[r] for r in merged}) != len(merged):
                        continue
                    if merged not in found:
                        found.add(merged)
                        budget[0] -= 1
                if budget[0] <= 0:
                    break
            result = sorted(found, key=sorted)
            memo[mid] = result
            return result

        if not mol_solved[self.target_id]:
            return [], False
        routes = routes_of(self.target_id)
        return routes, budget[0] <= 0

    # -- diagnostics ------------------------------------------------------------------

    def check_acyclic(self) -> bool:
        """Verify a topological order exists (every edge descends a level)."""
        for rid in range(self.n_reactions):
            if self._rxn_level[rid] <= self._mol_level[self._rxn_product[rid]]:
                return False
            for mid in self._rxn_reactants[rid]:
                if self._mol_level[mid] <= self._rxn_level[rid]:
                    return False
        return True

    def to_json(self) -> dict:
        """Debug dump of the full graph structure."""
        return {
            "molecules": [
                {
                    "key": self._mol_keys[i],
                    "is_stock": self._mol_stock[i],
                    "expanded": self._mol_expanded[i],
                    "pruned": self._mol_pruned[i],
                    "heuristic": [float(x) for x in self._mol_heur[i]],
                }
                for i in range(self.n_molecules)
            ],
            "reactions": [
                {
                    "product": self._mol_keys[self._rxn_product[r]],
                    "reactants": [self._mol_keys[m] for m in self._rxn_reactants[r]],
                    "cost": [float(x) for x in self._rxn_cost[r]],
                    "rule_id": self._rxn_record[r].rule_id,
                }
                for r in range(self.n_reactions)
            ],
        }

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
