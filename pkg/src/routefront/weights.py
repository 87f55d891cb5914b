"""Weight vectors on the probability simplex and their sampling strategies.

Three strategies feed the scalarized searches: a deterministic lattice
(grid), a quasi-random low-discrepancy sequence (sobol), and a surrogate-
guided sampler (bo) that fits a Gaussian process to the decayed
hypervolume improvements of previously evaluated weights and proposes the
next batch by greedy information-gain maximization with a log-determinant
diversity term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.stats import norm, qmc

from .graph import ContractError

SIMPLEX_TOL = 1e-12


def is_simplex(w: np.ndarray, tol: float = SIMPLEX_TOL) -> bool:
    w = np.asarray(w, dtype=float)
    return bool(np.all(w >= -tol) and abs(float(w.sum()) - 1.0) <= tol)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head, *rest)


def simplex_grid(steps: int, dim: int) -> np.ndarray:
    """All lattice points with spacing 1/steps on the simplex, lexicographic order."""
    if steps < 1 or dim < 1:
        raise ValueError("steps and dim must be >= 1")
    points = np.array(list(_compositions(steps, dim)), dtype=float) / steps
    return points


def grid_pool(resolution: float, dim: int) -> np.ndarray:
    """Uniform-grid weight pool with the given lattice spacing."""
    steps = round(1.0 / resolution)
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-6:
        raise ValueError(f"resolution {resolution} does not divide 1 into integer steps")
    return simplex_grid(steps, dim)


def warmup_grid(
    dim: int,
    guidance_index: int,
    step: float = 0.25,
    min_guidance: float = 0.5,
) -> np.ndarray:
    """Coarse lattice restricted to points with enough mass on the guidance dimension.

    The restriction biases the earliest scalarizations toward weights that
    actually reach stock, which is what the surrogate needs to see first.
    """
    points = grid_pool(step, dim)
    keep = points[:, guidance_index] >= min_guidance - 1e-12
    return points[keep]


def sobol_pool(count: int, dim: int, seed: int, include_extremes: bool = True) -> np.ndarray:
    """Low-discrepancy weight pool via the sorted-gaps map onto the simplex.

    Draws ``count`` Sobol points in the (dim-1)-cube, converts each to a
    simplex point by taking the gaps of its sorted coordinates (the uniform
    Dirichlet transform), and optionally appends the ``dim`` unit vectors.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim == 1:
        points = np.ones((count, 1))
    else:
        engine = qmc.Sobol(d=dim - 1, scramble=True, seed=seed)
        m = max(1, int(np.ceil(np.log2(count))))
        cube = engine.random(2**m)[:count]
        padded = np.hstack([
            np.zeros((count, 1)),
            np.sort(cube, axis=1),
            np.ones((count, 1)),
        ])
        points = np.diff(padded, axis=1)
        points = points / points.sum(axis=1, keepdims=True)
    if include_extremes:
        points = np.vstack([points, np.eye(dim)])
    return points


def decay_utility(u0: float, age: int, decay: float = 0.5, age_max: int = 2) -> float:
    """Age-discounted utility: decay**age * u0, dropping to zero beyond age_max."""
    if u0 < 0:
        raise ValueError("utility must be non-negative")
    if age < 0:
        raise ValueError("age must be non-negative")
    if age > age_max:
        return 0.0
    return decay**age * u0


# ---------------------------------------------------------------------------
# Gaussian-process surrogate
# ---------------------------------------------------------------------------

class RbfSurrogate:
    """Zero-mean GP with an RBF kernel and a bounded, grid-fitted lengthscale.

    Targets are standardized internally; the lengthscale is chosen by
    maximizing the log marginal likelihood over a geometric grid inside
    ``lengthscale_bounds``. The noise floor keeps the Cholesky stable while
    leaving the posterior essentially interpolating.
    """

    def __init__(
        self,
        lengthscale_bounds: tuple[float, float] = (0.05, 0.5),
        noise: float = 1e-6,
        n_lengthscales: int = 24,
    ):
        self.lengthscale_bounds = lengthscale_bounds
        self.noise = noise
        self.n_lengthscales = n_lengthscales
        self._X: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self._X is not None

    def _kernel(self, a: np.ndarray, b: np.ndarray, lengthscale: float) -> np.ndarray:
        sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T
        return np.exp(-0.5 * np.maximum(sq, 0.0) / lengthscale**2)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RbfSurrogate":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("X and y must be non-empty and aligned")

        self._y_mean = float(y.mean())
        spread = float(y.std())
        self._y_std = spread if spread > 1e-12 else 1.0
        ys = (y - self._y_mean) / self._y_std

        lo, hi = self.lengthscale_bounds
        best = (-np.inf, None, None, None)
        n = X.shape[0]
        for ls in np.geomspace(lo, hi, self.n_lengthscales):
            K = self._kernel(X, X, ls) + self.noise * np.eye(n)
            try:
                factor = cho_factor(K, lower=True)
            except np.linalg.LinAlgError:
                continue
            alpha = cho_solve(factor, ys)
            log_lik = (
                -0.5 * float(ys @ alpha)
                - float(np.log(np.diag(factor[0])).sum())
                - 0.5 * n * np.log(2.0 * np.pi)
            )
            if log_lik > best[0]:
                best = (log_lik, ls, factor, alpha)
        if best[1] is None:
            raise RuntimeError("kernel matrix could not be factorized at any lengthscale")

        self._X = X
        self.lengthscale = float(best[1])
        self._factor = best[2]
        self._alpha = best[3]
        return self

    def _require_fitted(self):
        if not self.fitted:
            raise RuntimeError("surrogate is not fitted")

    def _predict_std_scale(self, Xq: np.ndarray):
        """Posterior mean/std on the standardized-target scale."""
        self._require_fitted()
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        k_star = self._kernel(self._X, Xq, self.lengthscale)
        mean = k_star.T @ self._alpha
        v = solve_triangular(self._factor[0], k_star, lower=True)
        var = np.maximum(1.0 - np.sum(v**2, axis=0), 0.0)
        return mean, np.sqrt(var)

    def predict(self, Xq: np.ndarray):
        """Posterior mean and standard deviation on the original utility scale."""
        mean, std = self._predict_std_scale(Xq)
        return self._y_mean + self._y_std * mean, self._y_std * std

    def conditional_var(self, Xq: np.ndarray, extra: np.ndarray) -> np.ndarray:
        """Posterior variance at Xq given the training set plus pending points.

        Only kernel geometry matters here (no target values), which is what
        the batch-diversity term of the acquisition needs.
        """
        self._require_fitted()
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        extra = np.atleast_2d(np.asarray(extra, dtype=float)) if len(extra) else np.zeros((0, Xq.shape[1]))
        X_all = np.vstack([self._X, extra])
        K = self._kernel(X_all, X_all, self.lengthscale) + self.noise * np.eye(X_all.shape[0])
        factor = cho_factor(K, lower=True)
        k_star = self._kernel(X_all, Xq, self.lengthscale)
        v = solve_triangular(factor[0], k_star, lower=True)
        return np.maximum(1.0 - np.sum(v**2, axis=0), 0.0)


def _max_value_entropy(mean: np.ndarray, std: np.ndarray, y_star: float) -> np.ndarray:
    """Single-sample max-value entropy approximation of per-point information gain."""
    std = np.maximum(std, 1e-9)
    gamma = (y_star - mean) / std
    cdf = np.clip(norm.cdf(gamma), 1e-12, None)
    return gamma * norm.pdf(gamma) / (2.0 * cdf) - np.log(cdf)


def acquisition_values(surrogate: RbfSurrogate, candidates: np.ndarray) -> np.ndarray:
    """Scores used for the first greedy pick (information gain + own entropy)."""
    mean, std = surrogate._predict_std_scale(candidates)
    y_star = float(np.max(mean + 2.0 * std))
    base_var = surrogate.conditional_var(candidates, np.zeros((0, candidates.shape[1])))
    return _max_value_entropy(mean, std, y_star) + 0.5 * np.log(base_var + surrogate.noise)


def bo_propose(surrogate: RbfSurrogate, candidates: np.ndarray, batch: int) -> np.ndarray:
    """Pick a diverse, informative batch of weights from a candidate set.

    Greedy sequential maximization: each pick maximizes the max-value-entropy
    score plus the incremental log-variance of the batch kernel matrix given
    everything observed and already selected. Deterministic given the
    surrogate state and candidate order; never repeats a candidate within
    the batch.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("candidate set is empty")
    surrogate._require_fitted()

    mean, std = surrogate._predict_std_scale(candidates)
    y_star = float(np.max(mean + 2.0 * std))
    info_gain = _max_value_entropy(mean, std, y_star)

    selected: list[int] = []
    for _ in range(min(batch, candidates.shape[0])):
        cond_var = surrogate.conditional_var(candidates, candidates[selected])
        scores = info_gain + 0.5 * np.log(cond_var + surrogate.noise)
        scores[selected] = -np.inf
        selected.append(int(np.argmax(scores)))
    return candidates[selected]


# ---------------------------------------------------------------------------
# Pool driving the search loop
# ---------------------------------------------------------------------------

@dataclass
class PoolEntry:
    """Evaluation history of one weight vector (bo strategy)."""

    weight: np.ndarray
    utility: float
    age: int


@dataclass
class WeightPool:
    """Sampler state shared by the search loop across re-sampling windows.

    For the finite strategies (grid, sobol, fixed) the pool walks a
    precomputed sequence in chunks of ``n_active`` and flags exhaustion when
    the sequence runs out. For ``bo`` the pool records per-weight hypervolume
    improvements, decays them by age, refits the surrogate, and proposes the
    next batch from a fresh candidate set.
    """

    strategy: str
    dim: int
    n_active: int
    seed: int = 0
    guidance_index: int = -1
    grid_resolution: float = 1.0 / 3.0
    sobol_count: int = 32
    sobol_extremes: bool = True
    fixed_weights: np.ndarray | None = None
    warmup_step: float = 0.25
    warmup_min_guidance: float = 0.5
    utility_decay: float = 0.5
    utility_age_max: int = 2
    candidate_source: str = "sobol"
    candidate_count: int = 128
    candidate_grid_steps: int = 8
    lengthscale_bounds: tuple[float, float] = (0.05, 0.5)

    exhausted: bool = field(default=False, init=False)
    active: np.ndarray = field(default=None, init=False)
    history: list[PoolEntry] = field(default_factory=list, init=False)
    _sequence: np.ndarray = field(default=None, init=False)
    _cursor: int = field(default=0, init=False)
    _resamples: int = field(default=0, init=False)

    def __post_init__(self):
        if self.strategy not in ("grid", "sobol", "bo", "fixed"):
            raise ValueError(f"unknown weight strategy {self.strategy!r}")
        guidance = self.guidance_index if self.guidance_index >= 0 else self.dim - 1
        self.guidance_index = guidance
        if self.strategy == "grid":
            self._sequence = grid_pool(self.grid_resolution, self.dim)
        elif self.strategy == "sobol":
            self._sequence = sobol_pool(self.sobol_count, self.dim, self.seed, self.sobol_extremes)
        elif self.strategy == "fixed":
            if self.fixed_weights is None:
                raise ValueError("fixed strategy requires fixed_weights")
            weights = np.atleast_2d(np.asarray(self.fixed_weights, dtype=float))
            for w in weights:
                if not is_simplex(w):
                    raise ValueError(f"fixed weight {w} is not on the simplex")
            self._sequence = weights
        else:  # bo: warm-up lattice first, surrogate afterwards
            self._sequence = warmup_grid(
                self.dim, guidance, self.warmup_step, self.warmup_min_guidance
            )

    def _next_chunk(self) -> np.ndarray | None:
        chunk = self._sequence[self._cursor : self._cursor + self.n_active]
        self._cursor += len(chunk)
        return chunk if len(chunk) else None

    def initialize(self) -> np.ndarray:
        chunk = self._next_chunk()
        if chunk is None:
            raise ContractError("weight pool is empty at initialization")
        self.active = chunk
        return self.active

    # -- bo bookkeeping -------------------------------------------------------

    def _record_utilities(self, utilities: np.ndarray) -> None:
        for entry in self.history:
            entry.age += 1
        for w, u in zip(self.active, utilities):
            key_match = None
            for entry in self.history:
                if np.array_equal(entry.weight, w):
                    key_match = entry
                    break
            if key_match is None:
                self.history.append(PoolEntry(weight=np.array(w), utility=float(u), age=0))
            elif u > 0.0:
                key_match.utility = float(u)
                key_match.age = 0

    def decayed_utilities(self) -> np.ndarray:
        return np.array([
            decay_utility(e.utility, e.age, self.utility_decay, self.utility_age_max)
            for e in self.history
        ])

    def _candidates(self) -> np.ndarray:
        if self.candidate_source == "grid":
            return simplex_grid(self.candidate_grid_steps, self.dim)
        seed = self.seed * 100_003 + 17 + self._resamples
        return sobol_pool(self.candidate_count, self.dim, seed, include_extremes=False)

    def _propose(self) -> np.ndarray:
        X = np.stack([e.weight for e in self.history])
        surrogate = RbfSurrogate(lengthscale_bounds=self.lengthscale_bounds)
        surrogate.fit(X, self.decayed_utilities())
        return bo_propose(surrogate, self._candidates(), self.n_active)

    # -- scheduled re-sampling ---------------------------------------------------

    def resample(self, iteration: int, w_budget: int, utilities: np.ndarray | None = None) -> np.ndarray | None:
        """Draw the next batch of active weights.

        Must be called on schedule (iteration > 0 and divisible by
        ``w_budget``). ``utilities`` carries the hypervolume improvement each
        active weight produced during the closing window (bo only). Returns
        the new batch, or None once a finite pool is exhausted.
        """
        if iteration <= 0 or iteration % w_budget != 0:
            raise ContractError(f"resample called off-schedule at iteration {iteration}")
        self._resamples += 1

        if self.strategy == "fixed":
            return self.active

        if self.strategy in ("grid", "sobol"):
            chunk = self._next_chunk()
            if chunk is None:
                self.exhausted = True
                return None
            self.active = chunk
            return self.active

        # bo
        if utilities is None:
            utilities = np.zeros(len(self.active))
        self._record_utilities(np.asarray(utilities, dtype=float))
        warmup_chunk = self._next_chunk()
        if warmup_chunk is not None:
            self.active = warmup_chunk
        else:
            self.active = self._propose()
        return self.active
