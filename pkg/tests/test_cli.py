from __future__ import annotations

import argparse
import json

import pytest

from app import EXIT_INPUT
from app import EXIT_REGIME
from app import cmd_bounds
from app import cmd_run
from app import merge_options
from folio.config import RUN_CONFIG_KEYS


@pytest.fixture(autouse=True)
def no_dotenv(monkeypatch):
    """Keep a developer's .env out of the CLI runs."""
    monkeypatch.setattr("folio.config.find_dotenv", lambda: "")
    for name in ("FOLIO_OFFLINE_TOL", "FOLIO_OFFLINE_MAX_ITER"):
        monkeypatch.delenv(name, raising=False)


def _args(**flags) -> argparse.Namespace:
    values = {key: None for key in RUN_CONFIG_KEYS}
    values["config"] = None
    values.update(flags)
    return argparse.Namespace(**values)


def _generated(**flags) -> argparse.Namespace:
    return _args(market="gen:iid_uniform", n=3, T=30, r_min=0.5, **flags)


class TestMergeOptions:
    def test_defaults(self):
        options = merge_options(_args())
        assert options["algorithm"] == "eg"
        assert options["delta"] == "0.05"
        assert options["market"] is None

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("algorithm=sampled\nseed=4\nr-min=0.4\n")
        options = merge_options(_args(config=str(path), seed=9))
        assert options["algorithm"] == "sampled"
        assert options["r_min"] == "0.4"
        assert options["seed"] == "9"


class TestCmdRun:
    def test_prints_summary(self, capsys):
        cmd_run(_generated())
        captured = capsys.readouterr()
        assert "alg1_eg" in captured.out
        assert "Regret bound" in captured.out

    def test_writes_json(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        cmd_run(_generated(algorithm="sampled", seed=3, out=str(out)))
        data = json.loads(out.read_text())
        assert data["algorithm"] == "alg2_sampled"
        assert data["params"]["seed"] == 3
        assert {"ls_achieved", "ls_star", "regret", "regret_bound", "bound_satisfied"} <= data.keys()
        assert "per_step" not in data
        assert str(out) in capsys.readouterr().out

    def test_verbose_json(self, tmp_path):
        out = tmp_path / "report.json"
        cmd_run(_generated(out=str(out), verbose=True))
        assert len(json.loads(out.read_text())["per_step"]) == 30

    def test_replications(self, capsys):
        cmd_run(_generated(algorithm="sampled", replications=3))
        assert "Mean regret" in capsys.readouterr().out

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        out = tmp_path / "report.csv"
        path.write_text(f"market=gen:two_asset_alternating\nn=2\nT=40\nr_min=0.5\nformat=csv\nout={out}\n")
        cmd_run(_args(config=str(path)))
        assert out.read_text().splitlines()[0].startswith("algorithm,seed,")

    def test_csv_market(self, tmp_path, capsys):
        prices = tmp_path / "prices.csv"
        prices.write_text("A,B\n10,20\n11,19\n10.5,20.5\n12,20\n")
        cmd_run(_args(market=str(prices)))
        assert "alg1_eg (n=2, T=3)" in capsys.readouterr().out

    def test_regime_refusal_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            cmd_run(_args(market="gen:iid_uniform", n=50, T=100, r_min=0.3, algorithm="quantum"))
        assert exc_info.value.code == EXIT_REGIME
        assert "Refused" in capsys.readouterr().out

    def test_missing_csv_exits_3(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc_info:
            cmd_run(_args(market=str(tmp_path / "missing.csv")))
        assert exc_info.value.code == EXIT_INPUT
        assert "Error" in capsys.readouterr().out

    def test_binary_csv_exits_3(self, tmp_path, capsys):
        prices = tmp_path / "prices.csv"
        prices.write_bytes(b"A,B\n\x80\x81,2\n")
        with pytest.raises(SystemExit) as exc_info:
            cmd_run(_args(market=str(prices)))
        assert exc_info.value.code == EXIT_INPUT
        assert "UTF-8" in capsys.readouterr().out

    def test_unknown_kind_exits_3(self):
        with pytest.raises(SystemExit) as exc_info:
            cmd_run(_args(market="gen:crash", n=2, T=10, r_min=0.5))
        assert exc_info.value.code == EXIT_INPUT

    def test_generated_market_needs_dimensions(self):
        with pytest.raises(SystemExit) as exc_info:
            cmd_run(_args(market="gen:iid_uniform", r_min=0.5))
        assert exc_info.value.code == EXIT_INPUT

    def test_bad_delta_is_a_refusal(self):
        with pytest.raises(SystemExit) as exc_info:
            cmd_run(_generated(delta=0.5))
        assert exc_info.value.code == EXIT_REGIME


class TestCmdBounds:
    def test_table(self, capsys):
        cmd_bounds(argparse.Namespace(n=2, T=1000, r_min=0.5, delta=0.05))
        out = capsys.readouterr().out
        assert "0.037233" in out
        assert "alg4_quantum_emulated" in out

    def test_no_crossover_at_unit_r_min(self, capsys):
        cmd_bounds(argparse.Namespace(n=2, T=100, r_min=1.0, delta=0.05))
        assert "never" in capsys.readouterr().out

    def test_invalid_arguments_exit_3(self):
        with pytest.raises(SystemExit) as exc_info:
            cmd_bounds(argparse.Namespace(n=2, T=0, r_min=0.5, delta=0.05))
        assert exc_info.value.code == EXIT_INPUT
