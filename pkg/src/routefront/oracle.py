"""Exhaustive route enumeration on bounded worlds.

Walks a provider depth-first from the target, enumerating every distinct
complete route (identified by its reaction set, so shared sub-routes in a
DAG are not double-counted) together with its exact cost vector. This is
the ground truth the search and pruning guarantees are tested against:
the true Pareto front and exact scalarized optima.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import Route, RouteStep, record_sort_key
from .metrics import nd_filter


class RouteCapExceeded(RuntimeError):
    """Enumeration passed the route cap while strict mode was on."""


@dataclass(frozen=True, eq=False)
class OracleRoute:
    """One complete route at provider level: reaction uids, cost, molecules."""

    reactions: frozenset[tuple[str, int]]
    cost: np.ndarray
    molecules: frozenset[str]


@dataclass
class EnumeratedWorld:
    """Every complete route from the target, or a capped prefix of them."""

    target: str
    routes: list[OracleRoute]
    overflow: bool
    cap: int
    reaction_info: dict[tuple[str, int], tuple]  # uid -> (record, cost vector)
    pareto_mask: np.ndarray

    def cost_matrix(self) -> np.ndarray:
        if not self.routes:
            dim = int(self.pareto_mask.shape[0])
            return np.zeros((0, dim))
        return np.stack([r.cost for r in self.routes])

    def to_route(self, index: int) -> Route:
        """Materialize an enumerated route for the structural validator."""
        oracle_route = self.routes[index]
        uids = sorted(
            oracle_route.reactions,
            key=lambda uid: (record_sort_key(self.reaction_info[uid][0]), uid),
        )
        steps = tuple(RouteStep(self.reaction_info[uid][0], self.reaction_info[uid][1]) for uid in uids)
        produced = {self.reaction_info[uid][0].product for uid in uids}
        leaves = frozenset(
            r for uid in uids for r in self.reaction_info[uid][0].reactants if r not in produced
        )
        return Route(
            target=self.target,
            steps=steps,
            cost=oracle_route.cost,
            frontier_leaves=leaves if uids else frozenset({self.target}),
            reaction_ids=tuple(range(len(uids))),
        )


def enumerate_routes(provider, objectives, target: str, cap: int = 1_000_000, strict: bool = False) -> EnumeratedWorld:
    """Enumerate all distinct complete routes from ``target`` to stock.

    ``cap`` bounds the total number of route sets generated; hitting it sets
    the overflow flag (or raises in strict mode) and leaves a truncated
    enumeration.
    """
    info: dict[tuple[str, int], tuple] = {}
    memo: dict[str, list[frozenset]] = {}
    budget = [cap]
    overflow = [False]

    def routes_of(mol: str) -> list[frozenset]:
        if provider.in_stock(mol):
            return [frozenset()]
        cached = memo.get(mol)
        if cached is not None:
            return cached
        found: set[frozenset] = set()
        for idx, record in enumerate(provider.expand(mol)):
            uid = (mol, idx)
            if uid not in info:
                info[uid] = (record, objectives.reaction_cost(record).values)
            sub_routes = [routes_of(r) for r in record.reactants]
            for combo in itertools.product(*sub_routes):
                if budget[0] <= 0:
                    overflow[0] = True
                    break
                merged = frozenset().union(*combo) | {uid}
                # branches must agree on how each shared molecule is made
                if len({u[0] for u in merged}) != len(merged):
                    continue
                if merged not in found:
                    found.add(merged)
                    budget[0] -= 1
            if budget[0] <= 0:
                overflow[0] = True
                break
        result = sorted(found, key=sorted)
        memo[mol] = result
        return result

    route_sets = routes_of(target)
    if overflow[0] and strict:
        raise RouteCapExceeded(f"more than {cap} routes from {target!r}")

    routes = []
    for ids in route_sets:
        # canonical record order keeps costs bit-identical with the search side
        uids = sorted(ids, key=lambda uid: (record_sort_key(info[uid][0]), uid))
        if uids:
            cost = np.add.reduce(np.stack([info[u][1] for u in uids]), axis=0)
        else:
            cost = np.zeros(objectives.dim)
        molecules = {target}
        for uid in uids:
            record = info[uid][0]
            molecules.add(record.product)
            molecules.update(record.reactants)
        routes.append(OracleRoute(frozenset(ids), cost, frozenset(molecules)))

    return EnumeratedWorld(
        target=target,
        routes=routes,
        overflow=overflow[0],
        cap=cap,
        reaction_info=info,
        pareto_mask=objectives.pareto_mask,
    )


def _require_complete(world: EnumeratedWorld) -> None:
    if world.overflow:
        raise RouteCapExceeded(
            f"enumeration of {world.target!r} overflowed its cap of {world.cap}; ground truth unavailable"
        )


def true_front(world: EnumeratedWorld) -> np.ndarray:
    """Non-dominated masked cost set over all enumerated routes."""
    _require_complete(world)
    costs = world.cost_matrix()
    return nd_filter(costs[:, world.pareto_mask])


def front_route_indices(world: EnumeratedWorld) -> list[int]:
    """Indices of all routes whose masked cost is not strictly dominated."""
    _require_complete(world)
    costs = world.cost_matrix()[:, world.pareto_mask]
    if costs.shape[0] == 0:
        return []
    front = true_front(world)
    dominated = np.zeros(costs.shape[0], dtype=bool)
    for f in front:
        dominated |= np.all(costs >= f, axis=1) & np.any(costs > f, axis=1)
    return [int(i) for i in np.nonzero(~dominated)[0]]


def scalar_optimum(world: EnumeratedWorld, weight: np.ndarray) -> float:
    """Minimum scalarized route cost over the whole world."""
    _require_complete(world)
    costs = world.cost_matrix()
    if costs.shape[0] == 0:
        raise ValueError(f"no routes exist for target {world.target!r}")
    return float(np.min(costs @ np.asarray(weight, dtype=float)))
