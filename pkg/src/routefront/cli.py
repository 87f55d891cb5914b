"""Configuration-driven experiment runner.

Verbs:
    run       execute one search and write its run JSON + hypervolume trace
    bench     run a suite of (world x strategy) searches and aggregate a CSV
    oracle    enumerate a world exhaustively and dump costs + true front
    plotdata  flatten a run JSON archive into a front-points CSV

All randomness flows from explicit seeds in the config; outputs are UTF-8
JSON/CSV and byte-stable for a fixed config (wall time is only recorded
when ``timing`` is set). ``ROUTEFRONT_WORKERS`` parallelizes benchmark
runs across processes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .expansion import SyntheticWorld, TemplateTableProvider, WorldSpec
from .metrics import (
    FrontStats,
    apply_normalization,
    dominance_coverage,
    hypervolume,
    percentile_bounds,
    r2_indicator,
)
from .objectives import AgentTable, load_agent_table, standard_objectives
from .search import SearchResult, run_search

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_ROUTE = 2

WORKERS_ENV = "ROUTEFRONT_WORKERS"


@dataclass
class RunConfig:
    """Everything one search run depends on; JSON round-trippable."""

    target: str = "T0"
    provider: dict = field(default_factory=lambda: {"kind": "synthetic", "world": {"seed": 0}})
    strategy: str = "moretro-bo"
    n_parallel_weights: int | None = None
    w_budget: int | None = None
    expansion_budget: int = 300
    time_budget_s: float | None = None
    max_candidates: int = 25
    fixed_weight: list | None = None
    epsilon: float = 0.0
    pruning: bool = False
    certify: str = "off"
    zero_heuristics: bool = False
    bounds_use_heuristics: bool = False
    archive_full_dim: bool = False
    hv_ref: float | list = 1.1
    grid_resolution: float = 1.0 / 3.0
    sobol_count: int = 32
    sobol_extremes: bool = True
    bo_candidate_source: str = "sobol"
    bo_candidate_count: int = 128
    route_cap: int = 100_000
    seed: int = 0
    timing: bool = False

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def build_provider(config: RunConfig):
    """Instantiate the provider + objective set a config describes."""
    spec = config.provider
    kind = spec.get("kind")
    if kind == "synthetic":
        world = WorldSpec.from_json(spec.get("world", {}))
        provider = SyntheticWorld(world, target=config.target)
        return provider, provider.objective_set()
    if kind == "template":
        provider = TemplateTableProvider.from_files(
            spec["templates"],
            spec["stock"],
            spec.get("properties"),
            max_candidates=config.max_candidates,
        )
        agents = load_agent_table(spec["agents"]) if spec.get("agents") else AgentTable()
        return provider, standard_objectives(provider.properties, agents)
    raise ValueError(f"unknown provider kind {kind!r} (expected 'synthetic' or 'template')")


# ---------------------------------------------------------------------------
# Run serialization
# ---------------------------------------------------------------------------

def run_payload(config: RunConfig, result: SearchResult) -> dict:
    mask = result.archive.mask
    archive = []
    for entry in result.archive.entries:
        route = entry.route
        archive.append({
            "cost": [float(x) for x in route.cost],
            "masked_cost": [float(x) for x in route.cost[mask]],
            "weight": None if route.generating_weight is None
            else [float(x) for x in route.generating_weight],
            "delta_hv": float(entry.delta_hv),
            "iteration": entry.iteration,
            "length": len(route),
            "leaves": sorted(route.frontier_leaves),
            "reactions": [
                {
                    "product": s.record.product,
                    "reactants": sorted(s.record.reactants),
                    "agents": sorted(s.record.agents),
                    "temperature": s.record.temperature,
                    "rule_id": s.record.rule_id,
                    "probability": s.record.probability,
                    "cost": [float(x) for x in s.cost],
                }
                for s in route.steps
            ],
        })
    front = result.archive.masked_costs()
    stats = result.stats
    return {
        "config": config.to_json(),
        "archive": archive,
        "metrics": {
            "hv": float(result.archive.hypervolume()),
            "r2": float(r2_indicator(front)) if len(front) else None,
            "n_routes": len(result.archive),
            "success": result.success,
        },
        "stats": {
            "iterations": stats.iterations,
            "expansions": stats.expansions,
            "routes_recorded": stats.routes_recorded,
            "n_molecules": stats.n_molecules,
            "n_reactions": stats.n_reactions,
            "cycles_discarded": stats.cycles_discarded,
            "terminated_on": stats.terminated_on,
            "pool_exhausted": stats.pool_exhausted,
            "route_cap_hit": stats.route_cap_hit,
            "best_scalar": stats.best_scalar,
            "pruning": stats.pruning,
            "wall_time_s": stats.wall_time_s,
            "success": result.success,
        },
    }


def dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def trace_csv(trace: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "expansions", "archive_size", "hv"])
    for row in trace:
        writer.writerow([row["iteration"], row["expansions"], row["archive_size"], repr(row["hv"])])
    return buf.getvalue()


def execute_run(config: RunConfig, out_dir: str | Path | None = None, name: str = "run") -> tuple[dict, SearchResult]:
    provider, objectives = build_provider(config)
    result = run_search(config, provider, objectives)
    payload = run_payload(config, result)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(dump_json(payload), encoding="utf-8")
        (out / f"{name}_trace.csv").write_text(trace_csv(result.trace), encoding="utf-8")
    return payload, result


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

def _bench_job(job: dict) -> dict:
    try:
        config = RunConfig.from_json(job["config"])
        payload, result = execute_run(config, job.get("out_dir"), job["name"])
        return payload
    except Exception as exc:  # record the failure per-row, keep the suite going
        return {"error": str(exc), "config": job["config"]}


def _suite_configs(suite: dict) -> tuple[list[dict], list[str]]:
    strategies = suite.get("strategies", ["moretro-bo", "fixed"])
    worlds = suite.get("worlds")
    if worlds is None:
        gen = suite.get("generate", {"count": 10})
        base = gen.get("base", {})
        start = gen.get("seed_start", 0)
        worlds = [dict(base, seed=start + i) for i in range(gen.get("count", 10))]
    base_run = suite.get("run", {})
    per_strategy = suite.get("per_strategy", {})

    jobs = []
    for world in worlds:
        for strategy in strategies:
            cfg = dict(base_run)
            cfg.update(per_strategy.get(strategy, {}))
            cfg.update({
                "provider": {"kind": "synthetic", "world": world},
                "strategy": strategy,
                "seed": world.get("seed", 0),
            })
            jobs.append({
                "config": RunConfig.from_json(cfg).to_json(),
                "name": f"run_s{world.get('seed', 0)}_{strategy}",
            })
    return jobs, strategies


def run_benchmark(suite: dict, out_dir: str | Path | None = None, workers: int | None = None) -> list[dict]:
    """Run each (world x strategy) pair and aggregate FrontStats rows.

    Costs are percentile-normalized per target across all strategies before
    hypervolume/R2 so the comparison is fair per molecule. Dominance
    coverage is reported on each baseline row against the first moretro-*
    strategy in the suite.
    """
    jobs, strategies = _suite_configs(suite)
    if out_dir is not None:
        for job in jobs:
            job["out_dir"] = str(Path(out_dir) / "runs")

    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            payloads = list(pool.map(_bench_job, jobs))
    else:
        payloads = [_bench_job(job) for job in jobs]

    reference = next((s for s in strategies if s.startswith("moretro")), strategies[0])
    by_world: dict[int, dict[str, dict]] = {}
    for payload in payloads:
        seed = payload["config"]["provider"]["world"].get("seed", 0)
        by_world.setdefault(seed, {})[payload["config"]["strategy"]] = payload

    rows = []
    for seed in sorted(by_world):
        runs = by_world[seed]
        pooled = [
            np.array(entry["masked_cost"])
            for payload in runs.values() if "archive" in payload
            for entry in payload["archive"]
        ]
        lo = hi = None
        if pooled:
            lo, hi = percentile_bounds(np.stack(pooled))

        def norm_front(payload):
            if "archive" not in payload or not payload["archive"]:
                return np.zeros((0, 0))
            costs = np.stack([np.array(e["masked_cost"]) for e in payload["archive"]])
            return apply_normalization(costs, lo, hi)

        ref_front = norm_front(runs[reference]) if reference in runs else np.zeros((0, 0))
        for strategy in strategies:
            payload = runs.get(strategy)
            if payload is None or "error" in payload:
                rows.append({"world_seed": seed, "strategy": strategy,
                             "error": payload.get("error", "missing") if payload else "missing"})
                continue
            front = norm_front(payload)
            success = bool(payload["stats"]["success"])
            hv = hypervolume(front, 1.1) if front.size else 0.0
            r2 = r2_indicator(front) if front.size else None
            if strategy == reference or not front.size or not ref_front.size:
                base_dom, self_dom = 0.0, 0.0
            else:
                base_dom, self_dom = dominance_coverage(ref_front, front)
            stats = FrontStats(
                hv=hv, r2=r2, n_routes=len(payload["archive"]),
                baseline_dominated_pct=base_dom, self_dominated_pct=self_dom,
                success=success,
            )
            pruning = payload["stats"]["pruning"]
            rows.append({
                "world_seed": seed,
                "strategy": strategy,
                "hv": stats.hv,
                "r2": stats.r2,
                "n_routes": stats.n_routes,
                "success": int(stats.success),
                "baseline_dominated_pct": stats.baseline_dominated_pct,
                "self_dominated_pct": stats.self_dominated_pct,
                "expansions": payload["stats"]["expansions"],
                "pruned_count": pruning.get("pruned_count", 0),
                "reduction_pct": pruning.get("search_space_reduction_percent", 0.0),
                "certified": int(bool(pruning.get("certified", False))),
            })
    return rows


def aggregate_csv(rows: list[dict], strategies: list[str]) -> str:
    """Per-run rows followed by a mean/std summary block per strategy."""
    columns = ["world_seed", "strategy", "hv", "r2", "n_routes", "success",
               "baseline_dominated_pct", "self_dominated_pct", "expansions",
               "pruned_count", "reduction_pct", "certified"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if "error" in row:
            writer.writerow([row["world_seed"], row["strategy"], "error", row["error"]] + [""] * 8)
            continue
        writer.writerow([row.get(c, "") if row.get(c) is not None else "" for c in columns])

    numeric = ["hv", "r2", "n_routes", "success", "baseline_dominated_pct",
               "self_dominated_pct", "expansions", "pruned_count", "reduction_pct", "certified"]
    for strategy in strategies:
        group = [r for r in rows if r.get("strategy") == strategy and "error" not in r]
        if not group:
            continue
        for label, fn in (("MEAN", np.mean), ("STD", np.std)):
            summary = [label, strategy]
            for col in numeric:
                values = [r[col] for r in group if r.get(col) is not None]
                summary.append(repr(float(fn(values))) if values else "")
            writer.writerow(summary)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Oracle + plot data
# ---------------------------------------------------------------------------

def oracle_payload(config: RunConfig, cap: int | None = None) -> dict:
    from .oracle import enumerate_routes, true_front

    provider, objectives = build_provider(config)
    world = enumerate_routes(provider, objectives, config.target, cap=cap or config.route_cap)
    payload = {
        "target": config.target,
        "n_routes": len(world.routes),
        "overflow": world.overflow,
        "costs": [[float(x) for x in r.cost] for r in world.routes],
    }
    if not world.overflow:
        front = true_front(world)
        from .oracle import front_route_indices

        payload["front"] = [[float(x) for x in row] for row in front]
        payload["front_indices"] = front_route_indices(world)
    return payload


def plotdata_csv(payload: dict) -> str:
    """One CSV row per archived route: masked cost, generating weight, length."""
    archive = payload.get("archive", [])
    n_masked = len(archive[0]["masked_cost"]) if archive else 0
    n_weight = len(payload["config"].get("fixed_weight") or []) or (
        len(archive[0]["weight"]) if archive and archive[0]["weight"] else 0
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [f"cost_{i}" for i in range(n_masked)]
        + [f"weight_{i}" for i in range(n_weight)]
        + ["length"]
    )
    for entry in archive:
        weight = entry["weight"] or [""] * n_weight
        writer.writerow([repr(c) for c in entry["masked_cost"]]
                        + [repr(w) if w != "" else "" for w in weight]
                        + [entry["length"]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        config.seed = args.seed
        if config.provider.get("kind") == "synthetic":
            config.provider.setdefault("world", {})["seed"] = args.seed
    if args.strategy is not None:
        config.strategy = args.strategy
    if args.epsilon is not None:
        config.epsilon = args.epsilon
        config.pruning = True
    if args.budget is not None:
        config.expansion_budget = args.budget
    return config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="routefront",
                                     description="Multi-objective route search experiments")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "bench", "oracle", "plotdata"):
        p = sub.add_parser(verb)
        if verb == "plotdata":
            p.add_argument("--run", required=True, help="run JSON emitted by `routefront run`")
        else:
            p.add_argument("--config", required=True, help="config JSON file")
        p.add_argument("--out", default="out", help="output directory (or file for plotdata)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--strategy", default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--budget", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            config = _apply_overrides(RunConfig.load(args.config), args)
            payload, result = execute_run(config, args.out)
            print(f"archive={len(payload['archive'])} expansions={payload['stats']['expansions']} "
                  f"terminated_on={payload['stats']['terminated_on']}")
            return EXIT_OK if result.success else EXIT_NO_ROUTE

        if args.verb == "bench":
            with open(args.config, encoding="utf-8") as fh:
                suite = json.load(fh)
            rows = run_benchmark(suite, out_dir=args.out)
            strategies = suite.get("strategies", ["moretro-bo", "fixed"])
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "aggregate.csv").write_text(aggregate_csv(rows, strategies), encoding="utf-8")
            print(f"wrote {out / 'aggregate.csv'} ({len(rows)} rows)")
            return EXIT_OK

        if args.verb == "oracle":
            config = _apply_overrides(RunConfig.load(args.config), args)
            payload = oracle_payload(config)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "oracle.json").write_text(dump_json(payload), encoding="utf-8")
            print(f"routes={payload['n_routes']} overflow={payload['overflow']}")
            return EXIT_OK

        # plotdata
        with open(args.run, encoding="utf-8") as fh:
            payload = json.load(fh)
        csv_text = plotdata_csv(payload)
        out = Path(args.out)
        if out.suffix != ".csv":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "front.csv"
        out.write_text(csv_text, encoding="utf-8")
        print(f"wrote {out}")
        return EXIT_OK

    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
