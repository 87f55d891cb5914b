"""Reaction cost objectives and molecule heuristics.

Four additive objectives are provided out of the box: sustainability
(temperature penalty combined with atom economy), toxicity of auxiliary
agents, scale-up potential (an extractive-separability proxy built on
logP differences), and a guidance objective derived from single-step
model confidence. All costs land in [0, 1] after normalization. The
guidance dimension participates in scalarization but is excluded from
Pareto comparisons via the cost-vector mask.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MissingPropertyError(KeyError):
    """Raised when a molecule has no property record."""

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"no property record for molecule '{self.key}'"


@dataclass(frozen=True)
class MoleculeProperties:
    """Per-molecule inputs consumed by the cost functions and heuristics."""

    heavy_atom_count: int
    toxicity_score: float
    price_score: float
    sa_score: float
    logp: float

    def __post_init__(self):
        if self.heavy_atom_count < 1:
            raise ValueError("heavy_atom_count must be >= 1")
        if not 0.0 <= self.toxicity_score <= 1.0:
            raise ValueError("toxicity_score must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class CostVector:
    """A non-negative objective vector plus its Pareto participation mask.

    ``pareto_mask[i]`` is False for dimensions (such as guidance) that
    steer the search but are ignored by dominance comparisons and front
    metrics. The mask is identical for every vector within one run.
    """

    values: np.ndarray
    pareto_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "pareto_mask", np.asarray(self.pareto_mask, dtype=bool))
        if self.values.shape != self.pareto_mask.shape:
            raise ValueError("values and pareto_mask must have matching shapes")
        if np.any(self.values < 0):
            raise ValueError("cost components must be non-negative")

    @property
    def masked(self) -> np.ndarray:
        """Components participating in Pareto comparisons."""
        return self.values[self.pareto_mask]

    def __len__(self) -> int:
        return self.values.shape[0]


PropertyLookup = Callable[[str], MoleculeProperties]


def table_lookup(table: Mapping[str, MoleculeProperties]) -> PropertyLookup:
    """Wrap a plain mapping so missing molecules raise MissingPropertyError."""

    def lookup(key: str) -> MoleculeProperties:
        try:
            return table[key]
        except KeyError:
            raise MissingPropertyError(key) from None

    return lookup


# ---------------------------------------------------------------------------
# Component cost functions
# ---------------------------------------------------------------------------

def temperature_penalty(temperature: float) -> float:
    """Piecewise energetic penalty for running a reaction at ``temperature`` (degC).

    Ambient conditions (15-25 degC) are free; the penalty grows towards
    cryogenic and high-temperature regimes. Output is one of
    {0, 0.25, 0.4, 0.6, 0.8, 1.0}.
    """
    t = float(temperature)
    if not math.isfinite(t):
        raise ValueError("temperature must be finite")
    if 15.0 <= t <= 25.0:
        return 0.0
    if 10.0 <= t < 15.0 or 25.0 < t <= 40.0:
        return 0.25
    if -20.0 <= t < 10.0:
        return 0.6
    if t < -20.0:
        return 1.0
    if 40.0 < t <= 120.0:
        return 0.4
    return 0.8  # t > 120


def atom_economy(reaction, props: PropertyLookup) -> float:
    """Ratio of product heavy atoms to total reactant heavy atoms, capped at 1."""
    product_atoms = props(reaction.product).heavy_atom_count
    reactant_atoms = sum(props(r).heavy_atom_count for r in reaction.reactants)
    if reactant_atoms <= 0:
        raise ValueError(f"reaction {reaction.rule_id!r}: reactant heavy-atom total must be positive")
    return min(1.0, product_atoms / reactant_atoms)


def sustainability_cost(reaction, props: PropertyLookup) -> float:
    """Equal-weight blend of the temperature penalty and (1 - atom economy)."""
    value = 0.5 * temperature_penalty(reaction.temperature) + 0.5 * (1.0 - atom_economy(reaction, props))
    return min(1.0, max(0.0, value))


@dataclass
class AgentTable:
    """Toxicity scores per agent identifier.

    Agents missing from the table receive ``default_score`` (a neutral
    prior rather than silent optimism) and bump ``unknown_count`` so runs
    can report how much of the scoring was guessed.
    """

    scores: dict[str, float] = field(default_factory=dict)
    default_score: float = 0.5
    aggregation: str = "max"  # "max" | "mean"
    unknown_count: int = 0

    def __post_init__(self):
        for agent, score in self.scores.items():
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"agent {agent!r} score {score} outside [0, 1]")
        if self.aggregation not in ("max", "mean"):
            raise ValueError("aggregation must be 'max' or 'mean'")

    def score(self, agent: str) -> float:
        if agent in self.scores:
            return self.scores[agent]
        self.unknown_count += 1
        return self.default_score


def toxicity_cost(reaction, agents: AgentTable) -> float:
    """Hazard cost of a reaction's auxiliary agents (0 when agent-free).

    The per-agent scores are combined with the table's aggregation rule;
    the default is the maximum, since hazard handling is driven by the
    worst component present.
    """
    if not reaction.agents:
        return 0.0
    values = [agents.score(a) for a in reaction.agents]
    if agents.aggregation == "max":
        return max(values)
    return sum(values) / len(values)


def separation_penalty(p_diff: float) -> float:
    """Threshold penalty on the mean |logP| gap between product and reactants.

    Large gaps mean easy extractive separation (low cost); gaps under 0.5
    are effectively inseparable. Output is one of {0, 0.2, 0.4, 0.6, 0.8, 1.0}.
    """
    if p_diff >= 3.0:
        return 0.0
    if p_diff >= 2.5:
        return 0.2
    if p_diff >= 2.0:
        return 0.4
    if p_diff >= 1.0:
        return 0.6
    if p_diff >= 0.5:
        return 0.8
    return 1.0


def scaleup_cost(reaction, props: PropertyLookup) -> float:
    """Separation-difficulty cost from logP differences across the reaction."""
    logp_prod = props(reaction.product).logp
    diffs = [abs(logp_prod - props(r).logp) for r in reaction.reactants]
    p_diff = sum(diffs) / len(diffs)
    return separation_penalty(p_diff)


def guidance_cost(probability: float) -> float:
    """Negative log-likelihood of the reaction, scaled by 1/10 and clipped to [0, 1]."""
    if probability <= 0.0:
        raise ValueError(f"reaction probability must be positive, got {probability}")
    return min(1.0, max(0.0, -math.log(probability) / 10.0))


# ---------------------------------------------------------------------------
# Objective assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Objective:
    """One named cost dimension with its heuristic and normalization bounds."""

    name: str
    cost_fn: Callable[..., float]
    heuristic_fn: Callable[[str], float]
    bounds: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"objective {self.name!r}: bounds must satisfy min < max")


@dataclass(frozen=True)
class ObjectiveSet:
    """Ordered objective collection defining the cost-vector layout of a run."""

    objectives: tuple[Objective, ...]
    guidance_index: int

    def __post_init__(self):
        if not 0 <= self.guidance_index < len(self.objectives):
            raise ValueError("guidance_index out of range")

    @property
    def dim(self) -> int:
        return len(self.objectives)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.objectives)

    @property
    def pareto_mask(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        mask[self.guidance_index] = False
        return mask

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        lo = np.array([o.bounds[0] for o in self.objectives])
        hi = np.array([o.bounds[1] for o in self.objectives])
        return np.clip((raw - lo) / (hi - lo), 0.0, 1.0)

    def reaction_cost(self, reaction) -> CostVector:
        """Assemble the full cost vector of one reaction, in objective order."""
        raw = np.array([o.cost_fn(reaction) for o in self.objectives], dtype=float)
        return CostVector(self.normalize(raw), self.pareto_mask)

    def molecule_heuristic(self, key: str, is_stock: bool = False) -> CostVector:
        """Future-cost estimate per objective; the zero vector for stock molecules."""
        if is_stock:
            return CostVector(np.zeros(self.dim), self.pareto_mask)
        raw = np.array([o.heuristic_fn(key) for o in self.objectives], dtype=float)
        return CostVector(np.clip(raw, 0.0, 1.0), self.pareto_mask)


def standard_objectives(
    props: PropertyLookup,
    agents: AgentTable | None = None,
    guidance_heuristic: Callable[[str], float] | None = None,
    bounds: Mapping[str, tuple[float, float]] | None = None,
) -> ObjectiveSet:
    """Build the default four-objective set: sustainability, toxicity, scale-up, guidance.

    Heuristics follow the property table: synthetic-accessibility score / 10
    for sustainability, the molecular toxicity probability for toxicity, and
    predicted price / 15 for scale-up. The guidance heuristic defaults to
    zero but can be overridden by a provider.
    """
    agents = agents if agents is not None else AgentTable()
    bounds = dict(bounds or {})

    def guid_heur(key: str) -> float:
        return 0.0 if guidance_heuristic is None else guidance_heuristic(key)

    objectives = (
        Objective(
            "sustainability",
            lambda r: sustainability_cost(r, props),
            lambda key: props(key).sa_score / 10.0,
            bounds.get("sustainability", (0.0, 1.0)),
        ),
        Objective(
            "toxicity",
            lambda r: toxicity_cost(r, agents),
            lambda key: props(key).toxicity_score,
            bounds.get("toxicity", (0.0, 1.0)),
        ),
        Objective(
            "scaleup",
            lambda r: scaleup_cost(r, props),
            lambda key: props(key).price_score / 15.0,
            bounds.get("scaleup", (0.0, 1.0)),
        ),
        Objective(
            "guidance",
            lambda r: guidance_cost(r.probability),
            guid_heur,
            bounds.get("guidance", (0.0, 1.0)),
        ),
    )
    return ObjectiveSet(objectives, guidance_index=3)


# ---------------------------------------------------------------------------
# File-backed tables
# ---------------------------------------------------------------------------

def load_property_table(path: str | Path) -> dict[str, MoleculeProperties]:
    """Load a JSON map of molecule key -> {heavy_atoms, sa, tox, price, logp}."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    table = {}
    for key, rec in raw.items():
        table[key] = MoleculeProperties(
            heavy_atom_count=int(rec["heavy_atoms"]),
            sa_score=float(rec["sa"]),
            toxicity_score=float(rec["tox"]),
            price_score=float(rec["price"]),
            logp=float(rec["logp"]),
        )
    return table


def load_agent_table(path: str | Path, **kwargs) -> AgentTable:
    """Load a JSON map of agent id -> toxicity score in [0, 1]."""
    with open(path, encoding="utf-8") as fh:
        scores = {str(k): float(v) for k, v in json.load(fh).items()}
    return AgentTable(scores=scores, **kwargs)
