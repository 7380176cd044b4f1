import json

import numpy as np
import pytest

from basinwave.cli import main, parse_config
from basinwave.core import RunConfig
from basinwave.errors import ValidationError


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# basinwave ")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


class TestParseConfig:
    def test_empty_document_gives_defaults(self):
        params, config = parse_config("{}")
        assert params.lam == 1.0
        assert params.beta == 21.0
        assert params.m == 7
        assert params.phi0 == 0.5
        assert params.psi0 == 0.3
        assert params.a0 == 1.0
        assert params.zstar == 1.0
        assert params.sdot == 1.0
        defaults = RunConfig(n_nodes=16)
        assert config.dt == defaults.dt
        assert config.t_end == defaults.t_end
        # resolution rule: 8 * beta * (h0 + sdot * t_end)
        assert config.n_nodes == 1361

    def test_partial_override(self):
        params, _ = parse_config('{"sdot": 2.0}')
        assert params.sdot == 2.0
        assert params.beta == 21.0

    def test_minimum_permeability_exponent(self):
        with pytest.raises(ValidationError):
            parse_config('{"m": 5}')

    def test_unknown_keys_listed(self):
        with pytest.raises(ValidationError, match="bogus"):
            parse_config('{"bogus": 1, "sdot": 1.0}')

    def test_type_mismatch_names_key(self):
        with pytest.raises(ValidationError, match="sdot"):
            parse_config('{"sdot": "fast"}')
        with pytest.raises(ValidationError, match="n_nodes"):
            parse_config('{"n_nodes": 100.5}')
        with pytest.raises(ValidationError, match="a0"):
            parse_config('{"a0": true}')

    def test_explicit_low_resolution_warns(self):
        with pytest.warns(UserWarning, match="under-resolve"):
            parse_config('{"n_nodes": 64}')


class TestSpeedCommand:
    def test_written_schema_and_values(self, tmp_path):
        out = tmp_path / "run"
        assert main(["speed", "--out", str(out)]) == 0
        header, rows = read_csv(out / "speed.csv")
        assert header == ["c", "phi_inf", "C", "residual", "iterations"]
        c, phi_inf, C, residual, iterations = rows[0]
        assert abs(float(c) - 0.2494496288213327) <= 1e-6
        assert abs(float(residual)) <= 1e-10
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "speed"
        assert manifest["outputs"] == ["speed.csv"]

    def test_manifest_replay_is_byte_identical(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        assert main(["speed", "--out", str(first)]) == 0
        assert main(
            ["speed", "--seed-manifest", str(first / "manifest.json"), "--out", str(second)]
        ) == 0
        assert (first / "speed.csv").read_bytes() == (second / "speed.csv").read_bytes()

    def test_config_and_manifest_are_exclusive(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{}")
        code = main(
            ["speed", "--config", str(cfg), "--seed-manifest", str(cfg), "--out", str(tmp_path / "x")]
        )
        assert code == 1


class TestSweepCommand:
    def test_monotone_speeds_and_point_dirs(self, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sweep", "--sweep", "sdot=0.5,1.0,2.0", "--out", str(out)]) == 0
        header, rows = read_csv(out / "sweep.csv")
        assert header == ["sdot", "c", "residual", "iterations"]
        speeds = [float(r[1]) for r in rows]
        assert len(speeds) == 3
        assert speeds[0] < speeds[1] < speeds[2]
        for k in range(3):
            assert (out / f"point_{k:03d}" / "speed.csv").exists()
            assert (out / f"point_{k:03d}" / "manifest.json").exists()

    def test_missing_axis_is_config_error(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path / "s")]) == 1

    def test_unknown_axis_rejected(self, tmp_path):
        assert main(["sweep", "--sweep", "zz=1,2", "--out", str(tmp_path / "s")]) == 1


class TestWaveCommand:
    def test_profile_csv(self, tmp_path):
        out = tmp_path / "wave"
        assert main(["wave", "--out", str(out), "--plot"]) == 0
        header, rows = read_csv(out / "profile.csv")
        assert header == ["zeta", "phi", "psi", "region"]
        regions = {r[3] for r in rows}
        assert regions == {"outer-above", "inner", "below"}
        assert (out / "plot.gp").read_text().count("profile.csv") >= 1


class TestSimulateCommand:
    def test_outputs_and_plot(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"t_end": 0.5, "dt": 0.005, "n_nodes": 96, "output_every": 0.1}')
        out = tmp_path / "sim"
        with pytest.warns(UserWarning):
            code = main(["simulate", "--config", str(cfg), "--out", str(out), "--plot"])
        assert code == 0
        header, rows = read_csv(out / "timeseries.csv")
        assert header == ["t", "h", "hdot"]
        assert float(rows[0][0]) == 0.0
        header, rows = read_csv(out / "profile.csv")
        assert header == ["z", "phi", "psi"]
        assert len(rows) == 96
        assert "timeseries.csv" in (out / "plot.gp").read_text()

    def test_simulate_replay_byte_identical(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"t_end": 0.5, "dt": 0.005, "n_nodes": 256, "output_every": 0.1}')
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["simulate", "--seed-manifest", str(a / "manifest.json"), "--out", str(b)]) == 0
        assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()
        assert (a / "profile.csv").read_bytes() == (b / "profile.csv").read_bytes()


class TestExitCodes:
    def test_validation_error_is_1(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"m": 5}')
        assert main(["speed", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_unreadable_config_is_1(self, tmp_path):
        assert main(["speed", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 1

    def test_solver_failure_is_2(self, tmp_path):
        cfg = tmp_path / "env.json"
        cfg.write_text('{"sdot": 0.0}')
        assert main(["speed", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    @pytest.mark.filterwarnings("ignore:n_nodes = 288")
    def test_verify_failure_is_3(self, tmp_path, capsys):
        # a short horizon leaves the boundary speed far from the matching
        # root, so the primary gap check fails and verify exits 3
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            '{"t_end": 2.0, "dt": 0.002, "n_nodes": 288, "output_every": 0.05}'
        )
        out = tmp_path / "v"
        assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 3
        header, rows = read_csv(out / "report.csv")
        assert header == ["check", "value", "tolerance", "pass"]
        assert any(r[0] == "speed_gap_matched" and r[3] == "false" for r in rows)
        assert "verification failed" in capsys.readouterr().err
