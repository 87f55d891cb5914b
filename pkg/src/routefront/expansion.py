"""Single-step expansion providers.

A provider answers three questions about molecules: how can one be made
(``expand``), is it purchasable (``in_stock``), and what are its bulk
properties (``properties``). Two implementations ship here: a seeded
synthetic world generator for benchmarks and oracle testing, and a
file-backed template table for user-supplied reaction data.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

from .objectives import AgentTable, MissingPropertyError, MoleculeProperties, ObjectiveSet, standard_objectives


class UnknownMoleculeError(MissingPropertyError):
    """Raised when a provider is asked about a molecule it never produced."""


class TemplateParseError(ValueError):
    """Raised on malformed template-table rows; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"template table line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class ReactionRecord:
    """One candidate retro step: reactants, conditions, and model confidence."""

    product: str
    reactants: tuple[str, ...]
    agents: tuple[str, ...] = ()
    temperature: float = 20.0
    rule_id: str = ""
    probability: float = 1.0

    def __post_init__(self):
        if not self.reactants:
            raise ValueError("reactants must be non-empty")
        if not 0.0 < self.probability <= 1.0:
            raise ValueError(f"probability must lie in (0, 1], got {self.probability}")


class ExpansionProvider(Protocol):
    """Interface the search loop expects from any molecule source."""

    def expand(self, molecule: str) -> list[ReactionRecord]: ...

    def in_stock(self, molecule: str) -> bool: ...

    def properties(self, molecule: str) -> MoleculeProperties: ...


# ---------------------------------------------------------------------------
# Deterministic hashing helpers (counter-based; independent of call order)
# ---------------------------------------------------------------------------

def _digest(*parts) -> bytes:
    payload = "\x1f".join(str(p) for p in parts)
    return hashlib.sha256(payload.encode("utf-8")).digest()

def _unit(*parts) -> float:
    """Uniform float in [0, 1) derived from the hashed parts."""
    return int.from_bytes(_digest(*parts)[:8], "big") / 2.0**64

def _randint(lo: int, hi: int, *parts) -> int:
    """Uniform integer in [lo, hi] derived from the hashed parts."""
    return lo + int(_unit(*parts) * (hi - lo + 1))

def _choice(options, *parts):
    return options[_randint(0, len(options) - 1, *parts)]


# ---------------------------------------------------------------------------
# Synthetic worlds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorldSpec:
    """Parameters of a generated world.

    Children are always strictly deeper than their parents and molecules at
    ``depth_max`` are forced into stock, so every world is a finite acyclic
    problem in which each molecule is solvable. Reaction attributes
    (temperature, agents, probability) and molecule properties are drawn per
    objective from the ranges below via counter-based hashing, which makes
    re-expansion of any molecule reproduce identical records regardless of
    visit order.
    """

    seed: int = 0
    depth_max: int = 4
    branching: int = 3
    reactants_min: int = 1
    reactants_max: int = 2
    stock_base: float = 0.0     # stock probability at depth 0
    stock_ramp: float = 0.35    # added stock probability per depth level
    temperatures: tuple[float, ...] = (-30.0, 0.0, 20.0, 30.0, 80.0, 150.0)
    agent_pool: int = 12
    agents_max: int = 2
    prob_floor: float = 0.05
    heavy_atoms: tuple[int, int] = (4, 40)
    sa_range: tuple[float, float] = (1.0, 10.0)
    tox_range: tuple[float, float] = (0.0, 1.0)
    price_range: tuple[float, float] = (0.0, 15.0)
    logp_range: tuple[float, float] = (-3.0, 6.0)

    def __post_init__(self):
        if self.depth_max < 1:
            raise ValueError("depth_max must be >= 1")
        if self.branching < 1:
            raise ValueError("branching must be >= 1")
        if not 1 <= self.reactants_min <= self.reactants_max:
            raise ValueError("need 1 <= reactants_min <= reactants_max")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "WorldSpec":
        kwargs = dict(data)
        for key in ("temperatures", "heavy_atoms", "sa_range", "tox_range", "price_range", "logp_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


_MOL_KEY = re.compile(r"^m(\d+)-[0-9a-f]{16}$")


class SyntheticWorld:
    """Seeded, stateless expansion provider over a generated molecule tree.

    Molecule keys encode their depth, and every attribute of a molecule or
    reaction is a pure function of (seed, key), so the provider needs no
    mutable registry and is safe to share across threads.
    """

    def __init__(self, spec: WorldSpec, target: str = "T0"):
        self.spec = spec
        self.target = target
        self._agent_ids = tuple(f"ag{i:02d}" for i in range(spec.agent_pool))

    # -- molecule identity ---------------------------------------------------

    def depth_of(self, molecule: str) -> int:
        if molecule == self.target:
            return 0
        m = _MOL_KEY.match(molecule)
        if m is None:
            raise UnknownMoleculeError(molecule)
        return int(m.group(1))

    def _child_key(self, parent: str, candidate: int, slot: int, depth: int) -> str:
        tag = _digest(self.spec.seed, "mol", parent, candidate, slot).hex()[:16]
        return f"m{depth}-{tag}"

    # -- provider interface --------------------------------------------------

    def in_stock(self, molecule: str) -> bool:
        depth = self.depth_of(molecule)
        if depth >= self.spec.depth_max:
            return True
        p = min(1.0, max(0.0, self.spec.stock_base + self.spec.stock_ramp * depth))
        return _unit(self.spec.seed, "stock", molecule) < p

    def expand(self, molecule: str) -> list[ReactionRecord]:
        depth = self.depth_of(molecule)
        if self.in_stock(molecule):
            return []
        seed = self.spec.seed
        records = []
        for i in range(self.spec.branching):
            n_react = _randint(self.spec.reactants_min, self.spec.reactants_max, seed, "nr", molecule, i)
            reactants = tuple(self._child_key(molecule, i, s, depth + 1) for s in range(n_react))
            n_agents = _randint(0, self.spec.agents_max, seed, "na", molecule, i)
            agents = tuple(sorted({
                _choice(self._agent_ids, seed, "ag", molecule, i, s) for s in range(n_agents)
            }))
            records.append(ReactionRecord(
                product=molecule,
                reactants=reactants,
                agents=agents,
                temperature=_choice(self.spec.temperatures, seed, "temp", molecule, i),
                rule_id=f"rule-{_digest(seed, 'rule', molecule, i).hex()[:8]}",
                probability=self.spec.prob_floor
                + (1.0 - self.spec.prob_floor) * _unit(seed, "prob", molecule, i),
            ))
        return records

    def properties(self, molecule: str) -> MoleculeProperties:
        self.depth_of(molecule)  # membership check
        seed = self.spec.seed

        def span(lo_hi, tag):
            lo, hi = lo_hi
            return lo + (hi - lo) * _unit(seed, tag, molecule)

        return MoleculeProperties(
            heavy_atom_count=_randint(*self.spec.heavy_atoms, seed, "atoms", molecule),
            sa_score=span(self.spec.sa_range, "sa"),
            toxicity_score=span(self.spec.tox_range, "tox"),
            price_score=span(self.spec.price_range, "price"),
            logp=span(self.spec.logp_range, "logp"),
        )

    # -- glue ------------------------------------------------------------------

    def agent_table(self) -> AgentTable:
        scores = {a: _unit(self.spec.seed, "agscore", a) for a in self._agent_ids}
        return AgentTable(scores=scores)

    def objective_set(self) -> ObjectiveSet:
        return standard_objectives(self.properties, self.agent_table())


# ---------------------------------------------------------------------------
# File-backed template tables
# ---------------------------------------------------------------------------

def load_stock_file(path: str | Path) -> set[str]:
    """Read a newline-separated list of stock molecule keys."""
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


@dataclass
class TemplateTableProvider:
    """Expansion provider backed by a JSON-lines reaction table.

    Each row is an object ``{product, reactants[], prob, rule_id,
    conditions: [{agents[], temp}]}``. Rows for a product are returned in
    descending probability order, truncated to ``max_candidates``, and each
    of a row's (at most two) condition variants becomes its own record.
    """

    rows_by_product: dict[str, list[dict]]
    stock: set[str]
    property_table: dict[str, MoleculeProperties] = field(default_factory=dict)
    max_candidates: int = 25

    @classmethod
    def from_files(
        cls,
        template_path: str | Path,
        stock_path: str | Path,
        property_path: str | Path | None = None,
        max_candidates: int = 25,
    ) -> "TemplateTableProvider":
        from .objectives import load_property_table

        rows_by_product: dict[str, list[dict]] = {}
        with open(template_path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TemplateParseError(line_no, f"invalid JSON ({exc.msg})") from None
                for field_name in ("product", "reactants", "prob"):
                    if field_name not in row:
                        raise TemplateParseError(line_no, f"missing field {field_name!r}")
                if not isinstance(row["reactants"], list) or not row["reactants"]:
                    raise TemplateParseError(line_no, "reactants must be a non-empty list")
                try:
                    row["prob"] = float(row["prob"])
                except (TypeError, ValueError):
                    raise TemplateParseError(line_no, "prob must be a number") from None
                if not 0.0 < row["prob"] <= 1.0:
                    raise TemplateParseError(line_no, f"prob {row['prob']} outside (0, 1]")
                rows_by_product.setdefault(str(row["product"]), []).append(row)

        props = load_property_table(property_path) if property_path else {}
        return cls(
            rows_by_product=rows_by_product,
            stock=load_stock_file(stock_path),
            property_table=props,
            max_candidates=max_candidates,
        )

    def in_stock(self, molecule: str) -> bool:
        return molecule in self.stock

    def properties(self, molecule: str) -> MoleculeProperties:
        try:
            return self.property_table[molecule]
        except KeyError:
            raise MissingPropertyError(molecule) from None

    def expand(self, molecule: str) -> list[ReactionRecord]:
        rows = self.rows_by_product.get(molecule, [])
        rows = sorted(rows, key=lambda r: -r["prob"])[: self.max_candidates]
        records = []
        for row in rows:
            conditions = row.get("conditions") or [{"agents": [], "temp": 20.0}]
            for cond in conditions[:2]:
                records.append(ReactionRecord(
                    product=molecule,
                    reactants=tuple(str(r) for r in row["reactants"]),
                    agents=tuple(str(a) for a in cond.get("agents", [])),
                    temperature=float(cond.get("temp", 20.0)),
                    rule_id=str(row.get("rule_id", "")),
                    probability=row["prob"],
                ))
        return records
