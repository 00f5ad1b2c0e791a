import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from corrspin import cli, experiments as ex, reduced_engine as red, validation
from corrspin.errors import ConfigError, ContractError


class TestConfig:
    def test_defaults_reproduce_reference_parameter_set(self):
        cfg = ex.default_config("sweep-xi")
        assert cfg.omega_q == 100.0
        assert cfg.g == 1.0
        assert cfg.v == 1.0
        assert cfg.nu == 0.0
        assert cfg.n_list == (6, 10, 14, 20, 26)
        assert len(cfg.xi_list) == 32
        assert cfg.xi_list[0] == pytest.approx(0.1)
        assert cfg.xi_list[-1] == pytest.approx(100.0)

    def test_parse_basic_keys(self):
        cfg = ex.parse_config_text(
            """
            # transfer under dephasing
            scenario = evolve
            n_spins = 8
            xi = 2.5
            v = 1.0
            nu = 0
            dt = auto
            """
        )
        assert cfg.scenario == "evolve"
        assert cfg.n_spins == 8
        assert cfg.xi == 2.5
        assert cfg.dt is None

    def test_parse_lists_and_inf(self):
        cfg = ex.parse_config_text(
            "scenario = blocking\nn_list = 1, 2, 3\nxi = inf\nnu = 1.0, 0.5, 2.0\n"
        )
        assert cfg.n_list == (1, 2, 3)
        assert np.isinf(cfg.xi)
        assert cfg.nu == (1.0, 0.5, 2.0)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            ex.parse_config_text("scenario = evolve\nwibble = 3\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            ex.parse_config_text("scenario = evolve\nn_spins = many\n")

    def test_scenario_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="declares scenario"):
            ex.parse_config_text("scenario = strobe\n", scenario="evolve")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            ex.parse_config_text("scenario = evolve\nxi = 1\nxi = 2\n")


class TestCsvContract:
    def test_rows_round_trip(self):
        cfg = replace(ex.default_config("evolve"), n_spins=4, t_final=0.5)
        result = ex.run_evolve(cfg)
        reader = csv.DictReader(io.StringIO(result.csv_text()))
        assert reader.fieldnames == ex.CSV_HEADER.split(",")
        rows = list(reader)
        assert len(rows) == len(result.rows)
        for row in rows:
            assert row["scenario"] == "evolve"
            float(row["t"]); int(row["site"]); float(row["sz"])
            float(row["abs_sx"]); float(row["purity"])
            assert row["quality"] == ""
        # deterministic order: t-major, site-minor
        keys = [(float(r["t"]), int(r["site"])) for r in rows]
        assert keys == sorted(keys)

    def test_significant_digits(self):
        assert ex._fmt(np.pi) == "3.14159265358979"
        assert ex._fmt(None) == ""
        assert ex._fmt(float("inf")) == "inf"

    def test_byte_identical_reruns(self):
        cfg = replace(
            ex.default_config("sweep-xi"),
            n_list=(4, 6), xi_list=tuple(np.logspace(-1, 2, 8)),
        )
        first = ex.run_sweep_xi(cfg).csv_text()
        second = ex.run_sweep_xi(replace(cfg)).csv_text()
        assert first == second

    def test_worker_pool_order_deterministic(self):
        cfg = replace(
            ex.default_config("sweep-xi"),
            n_list=(4, 6), xi_list=tuple(np.logspace(-1, 2, 8)),
        )
        serial = ex.run_sweep_xi(replace(cfg, workers=1)).csv_text()
        parallel = ex.run_sweep_xi(replace(cfg, workers=3)).csv_text()
        assert serial == parallel


class TestSweepScenario:
    def test_step_extraction_failure_keeps_partial_results(self):
        # noise-free sweep: quality is flat at 1, so no step exists
        cfg = replace(
            ex.default_config("sweep-xi"),
            n_list=(4,), v=0.0, xi_list=tuple(np.logspace(-1, 2, 8)),
        )
        result = ex.run_sweep_xi(cfg)
        entry = result.summary["per_n"][0]
        assert entry["xi_c"] is None
        assert "no step" in entry["error"]
        assert entry["w_p"] > 0
        assert len(result.rows) == 8  # quality rows still emitted
        assert "fit" not in result.summary


class TestEvolveScenario:
    def test_quality_in_summary_at_arrival(self):
        cfg = replace(ex.default_config("evolve"), n_spins=6, v=0.0, nu=0.0, xi=0.0)
        result = ex.run_evolve(cfg)
        assert result.summary["quality"] == pytest.approx(1.0, abs=1e-4)

    def test_dephasing_destroys_then_restores(self):
        base = replace(ex.default_config("evolve"), n_spins=12, c_dephasing=1.5)
        destroyed = ex.run_evolve(replace(base, xi=0.2))
        restored = ex.run_evolve(replace(base, xi=20.0))
        assert destroyed.summary["quality"] < 0.3
        assert restored.summary["quality"] > 0.9

    def test_full_engine_selectable(self):
        cfg = replace(ex.default_config("evolve"), n_spins=3, engine="full", t_final=1.0)
        result = ex.run_evolve(cfg)
        assert result.summary["engine"] == "full"


class TestBlockingScenario:
    def test_matches_closed_form(self):
        cfg = replace(ex.default_config("blocking"), n_list=(1, 2, 5, 10))
        result = ex.run_blocking(cfg)
        for row in result.summary["rows"]:
            assert not row["capped"]
            assert row["sz_first"] == pytest.approx(row["sz_first_predicted"], abs=1e-3)
            assert row["sz_total_plus_n"] == pytest.approx(
                row["sz_total_plus_n_predicted"], abs=1e-3)
            assert row["sigma_trf"] == pytest.approx(row["sigma_trf_predicted"], abs=1e-3)

    def test_precondition_enforced(self):
        cfg = replace(ex.default_config("blocking"), coupling="chain", n_list=(4,))
        with pytest.raises(ContractError):
            ex.run_blocking(cfg)
        cfg = replace(ex.default_config("blocking"), xi=0.5, n_list=(4,))
        with pytest.raises(ContractError):
            ex.run_blocking(cfg)


class TestStrobeScenario:
    def test_requires_relaxation_and_passes(self):
        with pytest.raises(ConfigError):
            ex.run_strobe(replace(ex.default_config("strobe"), passes=10))
        with pytest.raises(ConfigError):
            ex.run_strobe(replace(ex.default_config("strobe"), nu=0.0))

    def test_short_run_summary_fields(self):
        cfg = replace(ex.default_config("strobe"), n_spins=8, passes=60)
        result = ex.run_strobe(cfg)
        s = result.summary
        assert not s["fit_failed"]
        assert s["fast_rate"] > s["slow_rate"] > 0
        assert 1 <= s["inter_regime_pass"] <= 60
        assert 0.0 <= s["fidelity_end_pair_sym"] <= 1.0
        # rows: 2 sites per pass
        assert len(result.rows) == 2 * 60


class TestValidateScenario:
    def test_default_run_all_pass(self):
        result = ex.run_validate(ex.default_config("validate"))
        assert result.summary["all_passed"]
        assert result.exit_code == 0
        names = {c["name"] for c in result.summary["checks"]}
        assert {"engine-equivalence", "rk4-convergence", "blocking-closed-form"} <= names

    def test_oversized_dt_reported_as_divergence(self):
        cfg = replace(ex.default_config("validate"), dt=2.0)
        result = ex.run_validate(cfg)
        assert not result.summary["all_passed"]
        assert result.exit_code == 2
        failing = {c["name"]: c for c in result.summary["checks"] if not c["passed"]}
        assert "trace-hermiticity" in failing or "rk4-convergence" in failing
        assert any("diverged" in c["detail"] for c in failing.values())

    def test_injected_sign_error_caught(self, monkeypatch):
        original = red.build_hamiltonian_reduced

        def flipped(net, frame="rotating"):
            return -original(net, frame)

        monkeypatch.setattr(red, "build_hamiltonian_reduced", flipped)
        checks = dict(
            (name, ok) for name, ok, _ in validation.run_all(ex.default_config("validate"))
        )
        assert checks["engine-equivalence"] is False


class TestCli:
    def test_validate_roundtrip(self, tmp_path, capsys):
        code = cli.main(["validate", "--out", str(tmp_path)])
        assert code == 0
        out_dirs = list(tmp_path.glob("validate_*"))
        assert len(out_dirs) == 1
        summary = json.loads((out_dirs[0] / "summary.json").read_text())
        assert summary["all_passed"]
        assert (out_dirs[0] / "data.csv").read_text().startswith(ex.CSV_HEADER)

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("scenario = evolve\nn_spins = banana\n")
        assert cli.main(["evolve", "--config", str(bad), "--out", str(tmp_path)]) == 1

    def test_missing_config_exit_code(self, tmp_path):
        assert cli.main(["evolve", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_validation_failure_exit_code(self, tmp_path):
        bad = tmp_path / "diverge.cfg"
        bad.write_text("scenario = validate\ndt = 2.0\n")
        code = cli.main(["validate", "--config", str(bad), "--out", str(tmp_path)])
        assert code == 2

    def test_engine_cap_exit_code(self, tmp_path):
        cfg = tmp_path / "big.cfg"
        cfg.write_text("scenario = evolve\nn_spins = 12\nengine = full\n")
        assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path)]) == 1

    def test_unwritable_output_exit_code(self, tmp_path):
        target = tmp_path / "taken"
        target.write_text("a file, not a directory")
        cfg = tmp_path / "b.cfg"
        cfg.write_text("scenario = blocking\nn_list = 2\n")
        code = cli.main(["blocking", "--config", str(cfg), "--out", str(target)])
        assert code == 1

    def test_seed_recorded(self, tmp_path):
        cfg = tmp_path / "b.cfg"
        cfg.write_text("scenario = blocking\nn_list = 2\n")
        code = cli.main([
            "blocking", "--config", str(cfg), "--out", str(tmp_path), "--seed", "17",
        ])
        assert code == 0
        out_dir = next(tmp_path.glob("blocking_*"))
        assert json.loads((out_dir / "summary.json").read_text())["seed"] == 17
