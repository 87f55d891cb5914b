"""Front-quality metrics for sets of route cost vectors.

Everything here works on plain arrays of masked (Pareto-participating)
cost components under minimization. Hypervolume is exact for up to three
dimensions via a sweep; four dimensions fall back to a seeded Monte-Carlo
estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .weights import simplex_grid


def strictly_dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """True when a <= b component-wise with at least one strict inequality."""
    return bool(np.all(a <= b) and np.any(a < b))


def nd_filter(points: np.ndarray) -> np.ndarray:
    """Maximal non-dominated subset; duplicate rows collapse to one.

    Returns rows in lexicographic order. An empty input yields an empty
    array. Scans in ascending component-sum order: a strict dominator always
    has a strictly smaller sum, so every unmarked point is non-dominated and
    can eliminate its victims in one vectorized sweep.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return points.reshape(0, points.shape[1] if points.ndim == 2 else 0)
    unique = np.unique(points, axis=0)
    order = np.argsort(unique.sum(axis=1), kind="stable")
    pts = unique[order]
    dominated = np.zeros(pts.shape[0], dtype=bool)
    for i in range(pts.shape[0]):
        if dominated[i]:
            continue
        victims = np.all(pts >= pts[i], axis=1)
        victims[i] = False  # rows are unique, so >= everywhere means strictly dominated
        dominated |= victims
    return np.unique(pts[~dominated], axis=0)


# ---------------------------------------------------------------------------
# Hypervolume
# ---------------------------------------------------------------------------

def _staircase_area(gains: np.ndarray) -> float:
    """Area dominated (towards the origin) by 2-d gain points, maximization."""
    if gains.shape[0] == 0:
        return 0.0
    maximal = nd_filter(-gains)  # nd_filter works under minimization
    g = -maximal
    order = np.argsort(-g[:, 0], kind="stable")
    g = g[order]
    area, prev_y = 0.0, 0.0
    for x, y in g:
        if y > prev_y:
            area += x * (y - prev_y)
            prev_y = y
    return area


def _hv_exact(gains: np.ndarray) -> float:
    dim = gains.shape[1]
    if gains.shape[0] == 0:
        return 0.0
    if dim == 1:
        return float(np.max(gains))
    if dim == 2:
        return _staircase_area(gains)
    # dim == 3: sweep the third coordinate downwards, integrating 2-d slabs
    order = np.argsort(-gains[:, 2], kind="stable")
    g = gains[order]
    volume = 0.0
    for i in range(g.shape[0]):
        z_here = g[i, 2]
        z_next = g[i + 1, 2] if i + 1 < g.shape[0] else 0.0
        if z_here <= z_next:
            continue
        volume += _staircase_area(g[: i + 1, :2]) * (z_here - z_next)
    return volume


def hypervolume(
    points: np.ndarray,
    ref: float | np.ndarray = 1.1,
    mc_samples: int = 2_000_000,
    seed: int = 0,
) -> float:
    """Volume of objective space dominated by ``points`` up to ``ref``.

    Exact for 1-3 dimensions; 4 dimensions use a seeded Monte-Carlo
    estimate (a warning reports the standard error). Points beyond the
    reference are clamped with a warning; an empty front scores 0.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        return 0.0
    dim = points.shape[1]
    if dim > 4:
        raise ValueError(f"exact hypervolume supports at most 4 dimensions, got {dim}")
    ref = np.full(dim, float(ref)) if np.ndim(ref) == 0 else np.asarray(ref, dtype=float)
    if np.any(points > ref):
        warnings.warn("hypervolume: clamping points beyond the reference point")
        points = np.minimum(points, ref)
    if dim == 4:
        estimate, stderr = mc_hypervolume(points, ref, mc_samples, seed)
        warnings.warn(f"hypervolume: 4-d Monte-Carlo estimate, stderr={stderr:.2e}")
        return estimate
    gains = ref[None, :] - points
    return _hv_exact(gains)


def mc_hypervolume(
    points: np.ndarray,
    ref: np.ndarray,
    n_samples: int,
    seed: int = 0,
    chunk: int = 1_000_000,
) -> tuple[float, float]:
    """Monte-Carlo hypervolume estimate and its standard error."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(ref, dtype=float)
    box = float(np.prod(ref))
    if points.size == 0 or n_samples <= 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    # big dominators first: each point only scans samples still undominated
    order = np.argsort(-np.prod(np.maximum(ref[None, :] - points, 0.0), axis=1), kind="stable")
    sorted_points = points[order]
    hits = 0
    remaining = n_samples
    while remaining > 0:
        n = min(chunk, remaining)
        samples = rng.random((n, ref.shape[0])) * ref
        alive = samples
        for p in sorted_points:
            alive = alive[~np.all(alive >= p, axis=1)]
            if alive.shape[0] == 0:
                break
        hits += n - alive.shape[0]
        remaining -= n
    frac = hits / n_samples
    stderr = box * float(np.sqrt(max(frac * (1.0 - frac), 0.0) / n_samples))
    return box * frac, stderr


# ---------------------------------------------------------------------------
# Other indicators
# ---------------------------------------------------------------------------

def r2_indicator(
    front: np.ndarray,
    weight_set: np.ndarray | None = None,
    utopia: np.ndarray | None = None,
    resolution: int = 10,
) -> float:
    """Mean best weighted-Chebyshev utility of the front over a weight set.

    Uses utopia = 0 and a uniform simplex lattice of the given resolution by
    default. Each weight row is scaled to unit maximum before the Chebyshev
    utility max_i w_i * (v_i - utopia_i), so a constant front vector c*1
    scores exactly c under any weight. Lower is better; undefined
    (ValueError) for an empty front.
    """
    front = np.atleast_2d(np.asarray(front, dtype=float))
    if front.size == 0:
        raise ValueError("R2 is undefined for an empty front")
    dim = front.shape[1]
    if weight_set is None:
        weight_set = simplex_grid(resolution, dim)
    weight_set = np.atleast_2d(np.asarray(weight_set, dtype=float))
    weight_set = weight_set / weight_set.max(axis=1, keepdims=True)
    utopia = np.zeros(dim) if utopia is None else np.asarray(utopia, dtype=float)
    # chebyshev[w, p] = max_i w_i * (front[p, i] - utopia_i)
    chebyshev = np.max(weight_set[:, None, :] * (front[None, :, :] - utopia), axis=2)
    return float(np.mean(np.min(chebyshev, axis=1)))


def dominance_coverage(front_a: np.ndarray, front_b: np.ndarray) -> tuple[float, float]:
    """Percentages (b dominated by a, a dominated by b), strict dominance."""
    front_a = np.atleast_2d(np.asarray(front_a, dtype=float))
    front_b = np.atleast_2d(np.asarray(front_b, dtype=float))

    def pct_dominated(victims, dominators):
        if victims.size == 0:
            return 0.0
        count = sum(
            1 for v in victims if any(strictly_dominates(d, v) for d in dominators)
        )
        return 100.0 * count / victims.shape[0]

    if front_a.size == 0 or front_b.size == 0:
        return 0.0, 0.0
    return pct_dominated(front_b, front_a), pct_dominated(front_a, front_b)


def percentile_bounds(costs: np.ndarray, p_lo: float = 5.0, p_hi: float = 95.0):
    """Per-dimension (P_lo, P_hi) anchors over a pooled cost sample."""
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    if costs.size == 0:
        raise ValueError("need at least one route cost to normalize")
    lo = np.percentile(costs, p_lo, axis=0)
    hi = np.percentile(costs, p_hi, axis=0)
    return lo, hi


def apply_normalization(costs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Affine map sending [lo, hi] -> [0, 1] per dimension, clamped.

    Degenerate dimensions (hi == lo) collapse to 0.
    """
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    span = hi - lo
    out = np.zeros_like(costs, dtype=float)
    ok = span > 0
    out[:, ok] = np.clip((costs[:, ok] - lo[ok]) / span[ok], 0.0, 1.0)
    return out


def percentile_normalize(costs: np.ndarray, p_lo: float = 5.0, p_hi: float = 95.0) -> np.ndarray:
    """Normalize a pooled cost sample by its own percentile anchors."""
    lo, hi = percentile_bounds(costs, p_lo, p_hi)
    return apply_normalization(costs, lo, hi)


def route_dissimilarity(route_a, route_b) -> float:
    """1 - Jaccard similarity of the two routes' reaction signature sets.

    Signatures are (product, sorted reactants, rule id); two empty routes
    are identical (0).
    """
    sig_a, sig_b = route_a.signature_set(), route_b.signature_set()
    union = sig_a | sig_b
    if not union:
        return 0.0
    return 1.0 - len(sig_a & sig_b) / len(union)


@dataclass
class FrontStats:
    """Per-target summary mirroring the benchmark table columns."""

    hv: float
    r2: float | None
    n_routes: int
    baseline_dominated_pct: float
    self_dominated_pct: float
    success: bool

    def __post_init__(self):
        if self.hv < 0:
            raise ValueError("hypervolume must be non-negative")
        for pct in (self.baseline_dominated_pct, self.self_dominated_pct):
            if not 0.0 <= pct <= 100.0:
                raise ValueError("dominance percentages must lie in [0, 100]")
