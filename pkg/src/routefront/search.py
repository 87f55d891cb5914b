"""Best-first multi-objective route search over the AND-OR graph.

Each iteration runs several scalarized searches in parallel over a shared
graph: every active weight vector selects its cheapest frontier molecule,
the distinct selections are expanded once each (grouped selections spend
one budget unit), values are re-propagated, newly solved routes enter the
non-dominated archive, and weights are re-sampled on a fixed cadence.
Optional bound-based pruning cuts frontier molecules that provably cannot
carry a Pareto-optimal route and certifies the archive when the whole
frontier is cut.

The single-objective and fixed-weight baselines are degenerate
configurations of the same loop (one weight, no re-sampling).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .graph import ContractError, Route, SearchGraph
from .metrics import _hv_exact
from .pruning import compute_bounds, prune_frontier, prune_frontier_scalar
from .weights import WeightPool

STRATEGIES = ("moretro-bo", "moretro-grid", "moretro-sobol", "retro-star", "fixed")

# Per-strategy defaults: (pool kind, parallel weights, re-sampling cadence)
STRATEGY_DEFAULTS = {
    "moretro-bo": ("bo", 5, 12),
    "moretro-grid": ("grid", 5, 16),
    "moretro-sobol": ("sobol", 5, 10),
    "retro-star": ("fixed", 1, None),
    "fixed": ("fixed", 1, None),
}

DEFAULT_FIXED_WEIGHT = (0.2, 0.2, 0.2, 0.4)


@dataclass
class ArchivedRoute:
    route: Route
    delta_hv: float
    iteration: int


class ParetoArchive:
    """Mutable set of mutually non-dominated routes with hypervolume bookkeeping.

    Dominance is evaluated on the masked dimensions only; routes equal in
    masked cost to an archived one are rejected as non-improving duplicates,
    and routes are deduplicated by reaction-set identity before any cost
    comparison.
    """

    def __init__(self, mask: np.ndarray, hv_ref: np.ndarray):
        self.mask = np.asarray(mask, dtype=bool)
        self.hv_ref = np.asarray(hv_ref, dtype=float)
        if self.hv_ref.shape[0] != int(self.mask.sum()):
            raise ValueError("hv_ref must match the number of masked dimensions")
        self.entries: list[ArchivedRoute] = []
        self._seen_ids: set[tuple[int, ...]] = set()
        self._hv = 0.0

    def __len__(self) -> int:
        return len(self.entries)

    def masked_costs(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, int(self.mask.sum())))
        return np.stack([e.route.cost[self.mask] for e in self.entries])

    def full_costs(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.mask.shape[0]))
        return np.stack([e.route.cost for e in self.entries])

    def hypervolume(self) -> float:
        return self._hv

    def _recompute_hv(self) -> float:
        gains = np.clip(self.hv_ref[None, :] - self.masked_costs(), 0.0, None)
        return _hv_exact(gains) if len(self.entries) else 0.0

    def try_insert(self, route: Route, iteration: int) -> float | None:
        """Insert a route unless dominated; returns its hypervolume gain or None."""
        if route.reaction_ids in self._seen_ids:
            return None
        cost = route.cost[self.mask]
        for entry in self.entries:
            if np.all(entry.route.cost[self.mask] <= cost):
                return None  # strictly dominated, or an equal-cost duplicate
        self._seen_ids.add(route.reaction_ids)
        self.entries = [
            e for e in self.entries if not np.all(cost <= e.route.cost[self.mask])
        ]
        old_hv = self._hv
        self.entries.append(ArchivedRoute(route=route, delta_hv=0.0, iteration=iteration))
        self._hv = self._recompute_hv()
        delta = self._hv - old_hv
        self.entries[-1].delta_hv = delta
        return delta


@dataclass
class RunStats:
    iterations: int = 0
    expansions: int = 0
    routes_recorded: int = 0
    n_molecules: int = 0
    n_reactions: int = 0
    cycles_discarded: int = 0
    terminated_on: str = ""
    pool_exhausted: bool = False
    route_cap_hit: bool = False
    best_scalar: float | None = None
    pruning: dict = field(default_factory=dict)
    wall_time_s: float | None = None


@dataclass
class SearchResult:
    archive: ParetoArchive
    stats: RunStats
    trace: list[dict]
    graph: SearchGraph
    pruned_keys: list[str]
    best_scalar_route: Route | None = None

    @property
    def success(self) -> bool:
        return len(self.archive) > 0


def scalarize(values: np.ndarray, weight: np.ndarray) -> float:
    """Weighted sum over the full cost vector (guidance included)."""
    values = np.asarray(values, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if values.shape != weight.shape:
        raise ValueError(f"dimension mismatch: {values.shape} vs {weight.shape}")
    return float(weight @ values)


def _build_pool(config, dim: int, guidance_index: int) -> tuple[WeightPool, int | None]:
    if config.strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {config.strategy!r}")
    kind, default_ns, default_budget = STRATEGY_DEFAULTS[config.strategy]
    n_active = config.n_parallel_weights or default_ns
    w_budget = config.w_budget if config.w_budget is not None else default_budget

    fixed = None
    if kind == "fixed":
        n_active = 1
        w_budget = None
        if config.strategy == "retro-star":
            fixed = np.zeros(dim)
            fixed[guidance_index] = 1.0
        else:
            fixed = np.asarray(
                config.fixed_weight if config.fixed_weight is not None else DEFAULT_FIXED_WEIGHT,
                dtype=float,
            )
            if fixed.shape[0] != dim:
                raise ValueError("fixed weight dimension does not match the objective count")

    pool = WeightPool(
        strategy=kind,
        dim=dim,
        n_active=n_active,
        seed=config.seed,
        guidance_index=guidance_index,
        grid_resolution=config.grid_resolution,
        sobol_count=config.sobol_count,
        sobol_extremes=config.sobol_extremes,
        fixed_weights=fixed,
        candidate_source=config.bo_candidate_source,
        candidate_count=config.bo_candidate_count,
    )
    return pool, w_budget


def _merge_graph_front(graph: SearchGraph, archive: ParetoArchive, cap: int, iteration: int) -> tuple[int, bool]:
    """Fold the non-dominated front of all solved in-graph routes into the archive.

    Per-weight extraction only surfaces routes that minimize some linear
    scalarization; completing the archive from the explored graph is what
    makes the certified front exhaustive (unsupported points included).
    """
    route_sets, cap_hit = graph.enumerate_solved_routes(cap)
    inserted = 0
    for ids in route_sets:
        route = graph.materialize_route(ids)
        if archive.try_insert(route, iteration) is not None:
            inserted += 1
    return inserted, cap_hit


def run_search(config, provider, objectives) -> SearchResult:
    """Execute one configured search against a provider. See cli.RunConfig."""
    start = time.monotonic()
    dim = objectives.dim
    mask = np.ones(dim, dtype=bool) if config.archive_full_dim else objectives.pareto_mask
    hv_ref = np.asarray(config.hv_ref, dtype=float)
    if hv_ref.ndim == 0:
        hv_ref = np.full(int(mask.sum()), float(hv_ref))

    certify = config.certify
    pruning_on = config.pruning or certify != "off"
    if certify not in ("off", "pareto", "scalar"):
        raise ValueError(f"unknown certify mode {config.certify!r}")

    def heuristic_row(key: str, is_stock: bool) -> np.ndarray:
        if is_stock or config.zero_heuristics:
            return np.zeros(dim)
        return objectives.molecule_heuristic(key).values

    def molecule_info(key: str):
        stock = provider.in_stock(key)
        return stock, heuristic_row(key, stock)

    target_stock = provider.in_stock(config.target)
    graph = SearchGraph(config.target, target_stock, heuristic_row(config.target, target_stock))
    archive = ParetoArchive(mask=mask, hv_ref=hv_ref)
    stats = RunStats()
    trace: list[dict] = []
    pruned_keys: list[str] = []

    if target_stock:
        archive.try_insert(graph.materialize_route([]), iteration=0)
        stats.terminated_on = "stock_target"
        return _finalize(config, graph, archive, stats, trace, pruned_keys, start, certified=True)

    pool, w_budget = _build_pool(config, dim, objectives.guidance_index)
    weights = pool.initialize()
    window_gain = np.zeros(len(weights))
    resampling = w_budget is not None

    k = 0
    stop_after_record: str | None = None
    certified = False
    best_scalar: float | None = None
    best_scalar_route: Route | None = None

    while True:
        weight_matrix = np.asarray(pool.active, dtype=float)
        rxn_proj = graph.cost_matrix() @ weight_matrix.T
        leaf_proj = graph.heuristic_matrix() @ weight_matrix.T
        mol_rem, rxn_rem = graph.propagate_remaining(rxn_proj, leaf_proj)
        mol_thr, _ = graph.propagate_through(mol_rem, rxn_rem)
        mol_solved, rxn_solved = graph.solved_masks()

        if mol_solved[graph.target_id]:
            for j in range(weight_matrix.shape[0]):
                route = graph.extract_best_route(
                    rxn_rem[:, j], mol_solved, rxn_solved, weight=weight_matrix[j]
                )
                # the masked archive may reject guidance-cheap routes, so the
                # scalar incumbent is tracked independently of it
                if certify == "scalar" and j == 0:
                    value = scalarize(route.cost, weight_matrix[j])
                    if best_scalar is None or value < best_scalar:
                        best_scalar = value
                        best_scalar_route = route
                delta = archive.try_insert(route, k)
                if delta is not None:
                    window_gain[j] += delta
                    stats.routes_recorded += 1

        trace.append({
            "iteration": k,
            "expansions": stats.expansions,
            "archive_size": len(archive),
            "hv": archive.hypervolume(),
        })

        if pruning_on:
            bounds = compute_bounds(graph, use_heuristics=config.bounds_use_heuristics)
            if certify == "scalar":
                newly, certified = prune_frontier_scalar(graph, bounds, weight_matrix[0], best_scalar)
            else:
                newly, certified = prune_frontier(
                    graph, bounds, archive.masked_costs(), mask, config.epsilon
                )
            pruned_keys.extend(graph.molecule_key(m) for m in newly)
            if certified and certify == "pareto":
                _, cap_hit = _merge_graph_front(graph, archive, config.route_cap, k)
                stats.route_cap_hit |= cap_hit
                certified = not cap_hit
                stats.terminated_on = "certified"
                break
            if certified and certify == "scalar":
                stats.terminated_on = "certified"
                break

        frontier = graph.frontier_ids()
        if frontier.size == 0:
            if certify == "pareto":
                _, cap_hit = _merge_graph_front(graph, archive, config.route_cap, k)
                stats.route_cap_hit |= cap_hit
                certified = not cap_hit
            stats.terminated_on = "certified" if certified else "frontier_empty"
            break
        if stop_after_record is not None:
            stats.terminated_on = stop_after_record
            break
        if config.time_budget_s is not None and time.monotonic() - start > config.time_budget_s:
            stats.terminated_on = "time"
            break

        remaining = config.expansion_budget - stats.expansions
        if remaining <= 0:
            stats.terminated_on = "budget"
            break

        # Selection: weights choosing the same molecule are grouped and
        # expanded once; ties break on insertion order via the ascending ids.
        group: dict[int, int] = {}
        for j in range(weight_matrix.shape[0]):
            pick = int(frontier[int(np.argmin(mol_thr[frontier, j]))])
            group.setdefault(pick, j)
        selected = list(group)[:remaining]

        for mid in selected:
            key = graph.molecule_key(mid)
            records = provider.expand(key)
            candidates = [(rec, objectives.reaction_cost(rec).values) for rec in records]
            graph.add_expansion(mid, candidates, molecule_info)
            stats.expansions += 1

        k += 1
        if resampling and k % w_budget == 0 and not pool.exhausted:
            utilities = window_gain if pool.strategy == "bo" else None
            refreshed = pool.resample(k, w_budget, utilities)
            if refreshed is None:
                stats.pool_exhausted = True
                stop_after_record = "pool_exhausted"
            else:
                window_gain = np.zeros(len(refreshed))

    stats.iterations = k
    stats.best_scalar = best_scalar

    if config.strategy == "retro-star":
        _, cap_hit = _merge_graph_front(graph, archive, config.route_cap, k)
        stats.route_cap_hit |= cap_hit

    return _finalize(config, graph, archive, stats, trace, pruned_keys, start, certified,
                     best_scalar_route)


def _finalize(config, graph, archive, stats, trace, pruned_keys, start, certified,
              best_scalar_route=None) -> SearchResult:
    if stats.expansions > config.expansion_budget:
        raise ContractError("expansion budget exceeded")  # loop invariant, never expected
    stats.n_molecules = graph.n_molecules
    stats.n_reactions = graph.n_reactions
    stats.cycles_discarded = graph.cycles_discarded
    frontier_size = int(graph.frontier_ids().size)
    open_total = len(pruned_keys) + frontier_size
    stats.pruning = {
        "pruned_count": len(pruned_keys),
        "frontier_size": frontier_size,
        "certified": bool(certified),
        "epsilon": float(config.epsilon),
        "search_space_reduction_percent": (
            100.0 * len(pruned_keys) / open_total if open_total else 0.0
        ),
    }
    if config.timing:
        stats.wall_time_s = time.monotonic() - start
    return SearchResult(
        archive=archive,
        stats=stats,
        trace=trace,
        graph=graph,
        pruned_keys=pruned_keys,
        best_scalar_route=best_scalar_route,
    )
