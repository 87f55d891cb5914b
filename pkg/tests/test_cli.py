"""Config round-trips, CLI verbs, exit codes, report emitters."""

from __future__ import annotations

import json

import numpy as np
import pytest

from routefront.cli import (
    EXIT_CONFIG,
    EXIT_NO_ROUTE,
    EXIT_OK,
    RunConfig,
    aggregate_csv,
    dump_json,
    execute_run,
    main,
    oracle_payload,
    plotdata_csv,
    run_benchmark,
)


class TestRunConfig:
    def test_roundtrip(self):
        config = RunConfig(strategy="moretro-sobol", epsilon=0.1, seed=42,
                           provider={"kind": "synthetic", "world": {"seed": 42}})
        assert RunConfig.from_json(config.to_json()) == config

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="unknown config fields"):
            RunConfig.from_json({"not_a_field": 1})

    def test_defaults_per_strategy(self):
        from routefront.search import STRATEGY_DEFAULTS

        assert STRATEGY_DEFAULTS["moretro-bo"] == ("bo", 5, 12)
        assert STRATEGY_DEFAULTS["moretro-grid"] == ("grid", 5, 16)
        assert STRATEGY_DEFAULTS["moretro-sobol"] == ("sobol", 5, 10)


def write_config(tmp_path, **overrides):
    config = {
        "provider": {"kind": "synthetic", "world": {"seed": 4, "depth_max": 3, "branching": 2}},
        "strategy": "moretro-grid",
        "expansion_budget": 40,
        "seed": 4,
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


class TestRunVerb:
    def test_successful_run_exit_zero(self, tmp_path, capsys):
        path = write_config(tmp_path)
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_OK
        assert (tmp_path / "out" / "run.json").exists()
        assert (tmp_path / "out" / "run_trace.csv").exists()

    def test_stock_target_archive_of_one(self, tmp_path):
        templates = tmp_path / "t.jsonl"
        templates.write_text("", encoding="utf-8")
        stock = tmp_path / "stock.txt"
        stock.write_text("T0\n", encoding="utf-8")
        path = write_config(tmp_path, provider={
            "kind": "template", "templates": str(templates), "stock": str(stock),
        })
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "out" / "run.json").read_text())
        assert len(payload["archive"]) == 1

    def test_unsolvable_world_exit_two(self, tmp_path):
        # template world with no stock reachable
        templates = tmp_path / "t.jsonl"
        templates.write_text(
            '{"product": "T0", "reactants": ["dead"], "prob": 0.9, "rule_id": "r"}\n',
            encoding="utf-8",
        )
        stock = tmp_path / "stock.txt"
        stock.write_text("unrelated\n", encoding="utf-8")
        props = tmp_path / "props.json"
        record = {"heavy_atoms": 5, "sa": 3.0, "tox": 0.1, "price": 2.0, "logp": 1.0}
        props.write_text(json.dumps({"T0": record, "dead": record}), encoding="utf-8")
        path = write_config(tmp_path, provider={
            "kind": "template", "templates": str(templates), "stock": str(stock),
            "properties": str(props),
        })
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_NO_ROUTE

    def test_invalid_config_exit_one(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"strategy": "nope", "made_up": true}', encoding="utf-8")
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_metrics_block_in_run_json(self, tmp_path):
        path = write_config(tmp_path)
        main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        payload = json.loads((tmp_path / "out" / "run.json").read_text())
        metrics = payload["metrics"]
        assert metrics["n_routes"] == len(payload["archive"])
        assert metrics["success"] == (len(payload["archive"]) > 0)
        assert metrics["hv"] >= 0.0

    def test_seed_fixed_run_byte_identical(self, tmp_path):
        path = write_config(tmp_path, strategy="moretro-bo")
        main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(path), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "run.json").read_bytes() == (tmp_path / "b" / "run.json").read_bytes()
        assert (tmp_path / "a" / "run_trace.csv").read_bytes() == (tmp_path / "b" / "run_trace.csv").read_bytes()

    def test_flag_overrides(self, tmp_path):
        path = write_config(tmp_path)
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "o"),
                     "--budget", "5", "--strategy", "fixed", "--seed", "9"])
        assert code in (EXIT_OK, EXIT_NO_ROUTE)
        payload = json.loads((tmp_path / "o" / "run.json").read_text())
        assert payload["config"]["expansion_budget"] == 5
        assert payload["config"]["strategy"] == "fixed"
        assert payload["config"]["seed"] == 9


class TestBench:
    def suite(self):
        return {
            "generate": {"count": 3, "base": {"depth_max": 3, "branching": 2}, "seed_start": 0},
            "strategies": ["moretro-grid", "fixed"],
            "run": {"expansion_budget": 30, "hv_ref": 4.4},
        }

    def test_rows_and_summary(self, tmp_path):
        rows = run_benchmark(self.suite(), out_dir=tmp_path)
        assert len(rows) == 6  # 3 worlds x 2 strategies
        csv_text = aggregate_csv(rows, ["moretro-grid", "fixed"])
        assert csv_text.count("MEAN") == 2 and csv_text.count("STD") == 2
        per_run = list((tmp_path / "runs").glob("*.json"))
        assert len(per_run) == 6

    def test_mean_recomputable_from_rows(self, tmp_path):
        rows = run_benchmark(self.suite())
        grid_rows = [r for r in rows if r["strategy"] == "moretro-grid"]
        mean_hv = float(np.mean([r["hv"] for r in grid_rows]))
        csv_text = aggregate_csv(rows, ["moretro-grid", "fixed"])
        mean_line = next(l for l in csv_text.splitlines() if l.startswith("MEAN,moretro-grid"))
        assert float(mean_line.split(",")[2]) == pytest.approx(mean_hv)

    def test_cli_bench_verb(self, tmp_path):
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(self.suite()), encoding="utf-8")
        assert main(["bench", "--config", str(path), "--out", str(tmp_path / "bench")]) == EXIT_OK
        assert (tmp_path / "bench" / "aggregate.csv").exists()


class TestOracleVerb:
    def test_dump_contains_front(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path))
        payload = oracle_payload(config)
        assert payload["n_routes"] >= 1 and not payload["overflow"]
        assert len(payload["front"]) >= 1
        assert all(len(row) == 3 for row in payload["front"])

    def test_cli_oracle_verb(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["oracle", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
        payload = json.loads((tmp_path / "o" / "oracle.json").read_text())
        assert "front_indices" in payload


class TestPlotData:
    def test_rows_match_archive(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path))
        payload, _ = execute_run(config)
        csv_text = plotdata_csv(payload)
        lines = csv_text.strip().splitlines()
        assert len(lines) == 1 + len(payload["archive"])
        if payload["archive"]:
            first = payload["archive"][0]
            assert repr(first["masked_cost"][0]) in lines[1]

    def test_empty_archive_header_only(self):
        payload = {"config": RunConfig().to_json(), "archive": []}
        assert plotdata_csv(payload).strip().splitlines() == ["length"]

    def test_cli_plotdata_verb(self, tmp_path):
        cfg_path = write_config(tmp_path)
        main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        code = main(["plotdata", "--run", str(tmp_path / "out" / "run.json"),
                     "--out", str(tmp_path / "front.csv")])
        assert code == EXIT_OK
        assert (tmp_path / "front.csv").read_text().startswith("cost_0")


class TestWorkers:
    def test_env_var_parallel_bench(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ROUTEFRONT_WORKERS", "2")
        suite = {
            "generate": {"count": 2, "base": {"depth_max": 3, "branching": 2}},
            "strategies": ["fixed"],
            "run": {"expansion_budget": 10},
        }
        rows = run_benchmark(suite)
        assert len(rows) == 2
