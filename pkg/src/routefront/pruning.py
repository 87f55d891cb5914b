"""Vector-valued lower bounds and safe frontier pruning.

The bound machinery reuses the graph's two propagation passes with an
identity projection: the bottom-up pass yields a component-wise lower
bound on the cost of completing each node, and the top-down pass turns it
into a bound on any hypothetical full route passing through a node. A
frontier molecule whose through-bound is strictly dominated by an already
archived route (optionally with additive slack epsilon) cannot sit on any
Pareto-optimal route and is pruned. When that holds for the entire
frontier, the archive is certified complete.

Bounds here default to zero leaf values, which are always valid lower
bounds for non-negative costs; the search heuristics are not guaranteed
admissible and must be opted into explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SearchGraph


@dataclass
class BoundState:
    """Per-node lower bounds in full objective dimension."""

    mol_remaining: np.ndarray   # [n_mol, dim] completion-cost bound below each molecule
    rxn_remaining: np.ndarray   # [n_rxn, dim]
    mol_through: np.ndarray     # [n_mol, dim] bound on any route through each molecule
    rxn_through: np.ndarray     # [n_rxn, dim]
    epsilon: float = 0.0
    certified: bool = False


def compute_bounds(graph: SearchGraph, use_heuristics: bool = False, epsilon: float = 0.0) -> BoundState:
    """Refresh the component-wise bounds for every node of the graph."""
    if use_heuristics:
        leaves = graph.heuristic_matrix()
    else:
        leaves = np.zeros((graph.n_molecules, graph.dim))
    mol_rem, rxn_rem = graph.propagate_remaining(graph.cost_matrix(), leaves)
    mol_thr, rxn_thr = graph.propagate_through(mol_rem, rxn_rem)
    return BoundState(mol_rem, rxn_rem, mol_thr, rxn_thr, epsilon=epsilon)


def bound_dominated(
    through_bounds: np.ndarray,
    archive_costs: np.ndarray,
    epsilon: float = 0.0,
) -> np.ndarray:
    """Which bound rows are strictly dominated by some archived cost row.

    Comparison happens on whatever (masked) dimensions both arrays carry.
    ``epsilon`` is added to the bounds as slack, which relaxes the check to
    epsilon-dominance. Returns a boolean vector over bound rows; always
    False when the archive is empty.
    """
    through_bounds = np.atleast_2d(through_bounds)
    if archive_costs is None or len(archive_costs) == 0:
        return np.zeros(through_bounds.shape[0], dtype=bool)
    archive_costs = np.atleast_2d(archive_costs)
    slack = through_bounds + epsilon
    le = archive_costs[:, None, :] <= slack[None, :, :]
    lt = archive_costs[:, None, :] < slack[None, :, :]
    return np.any(np.all(le, axis=2) & np.any(lt, axis=2), axis=0)


def prune_frontier(
    graph: SearchGraph,
    bounds: BoundState,
    archive_costs: np.ndarray,
    mask: np.ndarray,
    epsilon: float = 0.0,
):
    """Prune every frontier molecule whose bound is dominated by the archive.

    Returns ``(pruned_ids, certified)`` where ``certified`` is True when the
    frontier is empty afterwards — every open molecule is either pruned or
    was already ruled out, which is the completeness termination condition.
    """
    frontier = graph.frontier_ids()
    if frontier.size == 0:
        bounds.certified = True
        return np.array([], dtype=np.int64), True
    dominated = bound_dominated(bounds.mol_through[frontier][:, mask], archive_costs, epsilon)
    pruned = frontier[dominated]
    graph.mark_pruned(pruned)
    certified = bool(dominated.all())
    bounds.certified = certified
    return pruned, certified


def prune_frontier_scalar(
    graph: SearchGraph,
    bounds: BoundState,
    weight: np.ndarray,
    best_cost: float | None,
):
    """Single-weight pruning: cut molecules that cannot beat the best route.

    ``best_cost`` is the scalarized cost of the best route found so far (None
    while unsolved, which disables pruning). A frontier molecule whose
    scalarized through-bound is >= best_cost cannot improve on it; when that
    holds for the whole frontier the incumbent is certified optimal.
    """
    frontier = graph.frontier_ids()
    if frontier.size == 0:
        bounds.certified = True
        return np.array([], dtype=np.int64), True
    if best_cost is None:
        return np.array([], dtype=np.int64), False
    scalar_bound = bounds.mol_through[frontier] @ np.asarray(weight, dtype=float)
    prunable = scalar_bound >= best_cost
    pruned = frontier[prunable]
    graph.mark_pruned(pruned)
    certified = bool(prunable.all())
    bounds.certified = certified
    return pruned, certified
