import csv
import io
import json
import math

import pytest

from macfade.cli import (
    ConfigError,
    GridSpec,
    RunConfig,
    dump_config,
    load_config,
    main,
    parse_config,
)
from macfade.fading import ExponentialGain, PiecewiseLinearEmpirical, UniformGain
from macfade.kernel import RateAwardVector


BASE_CONFIG = {
    "channel": {
        "sigma2": 1.0,
        "users": [
            {"fading": {"kind": "exponential", "mean": 1.0}, "pbar": 1.0},
            {"fading": {"kind": "exponential", "mean": 1.0}, "pbar": 1.0},
        ],
    },
    "mu": [0.7, 0.3],
    "solver": {"power_rel_tol": 1e-4},
    "quadrature": {"outer_abs_tol": 1e-7},
    "mc": {"n_samples": 100_000, "seed": 777},
    "mode": "corrected",
    "threads": 1,
}


def write_config(tmp_path, overrides=None, name="config.json"):
    doc = json.loads(json.dumps(BASE_CONFIG))
    for key, value in (overrides or {}).items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfigParsing:
    def test_round_trip_identity(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        again = parse_config(json.loads(dump_config(cfg)), tmp_path)
        assert again == cfg

    def test_round_trip_with_grid_and_empirical(self, tmp_path):
        overrides = {
            "mu": {"resolution": 10, "mu_min": 0.001},
            "channel": {
                "sigma2": 0.8,
                "users": [
                    {"fading": {"kind": "uniform", "low": 0.1, "high": 2.0}, "pbar": 0.5},
                    {"fading": {"kind": "empirical",
                                "knots": [[0.0, 0.0], [1.0, 0.4], [3.0, 1.0]]},
                     "pbar": 1.5},
                ],
            },
        }
        cfg = load_config(write_config(tmp_path, overrides))
        assert cfg.mu == GridSpec(10, 0.001)
        assert isinstance(cfg.channel.users[0].fading, UniformGain)
        assert isinstance(cfg.channel.users[1].fading, PiecewiseLinearEmpirical)
        again = parse_config(json.loads(dump_config(cfg)), tmp_path)
        assert again == cfg

    def test_empirical_csv_sidecar(self, tmp_path):
        (tmp_path / "trace.csv").write_text("h,F\n0.0,0.0\n1.0,0.4\n3.0,1.0\n")
        overrides = {
            "channel": {
                "sigma2": 1.0,
                "users": [
                    {"fading": {"kind": "empirical", "csv": "trace.csv"}, "pbar": 1.0},
                ],
            },
            "mu": [1.0],
        }
        cfg = load_config(write_config(tmp_path, overrides))
        assert cfg.channel.users[0].fading.h_knots == (0.0, 1.0, 3.0)

    @pytest.mark.parametrize("overrides,needle", [
        ({"channel": {"users": []}}, "channel"),
        ({"mode": "wrong"}, "mode"),
        ({"units": "dB"}, "units"),
        ({"mu": [0.7, 0.7]}, "mu"),
        ({"mu": [0.5, 0.25, 0.25]}, "mu"),
        ({"mc": {"n_samples": 0}}, "mc.n_samples"),
        ({"solver": {"power_rel_tol": -1.0}}, "solver.power_rel_tol"),
        ({"solver": {"unexpected": 1}}, "solver.unexpected"),
    ])
    def test_malformed_configs_name_the_field(self, tmp_path, overrides, needle):
        with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
            load_config(write_config(tmp_path, overrides))

    def test_missing_sigma2_named(self, tmp_path):
        doc = json.loads(json.dumps(BASE_CONFIG))
        del doc["channel"]["sigma2"]
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="sigma2"):
            load_config(str(path))

    def test_unknown_fading_kind(self, tmp_path):
        overrides = {
            "channel": {
                "sigma2": 1.0,
                "users": [{"fading": {"kind": "rician", "k": 3}, "pbar": 1.0}],
            },
            "mu": [1.0],
        }
        with pytest.raises(ConfigError, match="kind"):
            load_config(write_config(tmp_path, overrides))


class TestExitCodes:
    def test_invalid_json_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["solve", "--config", str(path)]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_file_is_config_error(self):
        assert main(["solve", "--config", "/no/such/file.json"]) == 1

    def test_grid_for_solve_is_config_error(self, tmp_path):
        path = write_config(tmp_path, {"mu": {"resolution": 10}})
        assert main(["solve", "--config", path]) == 1

    def test_explicit_mu_for_boundary_is_config_error(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["boundary", "--config", path]) == 1

    def test_solver_non_convergence_exits_2(self, tmp_path):
        path = write_config(tmp_path, {"solver": {"max_outer_iters": 1}})
        assert main(["solve", "--config", path]) == 2

    def test_usage_error_remapped_to_config_error(self, capsys):
        assert main(["solve"]) == 1  # missing --config
        assert main(["frobnicate", "--config", "x"]) == 1
        capsys.readouterr()


class TestSolveCommand:
    def test_symmetric_report(self, tmp_path, capsys):
        out = tmp_path / "solve.csv"
        path = write_config(tmp_path, {"mu": [0.5, 0.5], "output": str(out)})
        assert main(["solve", "--config", path]) == 0
        capsys.readouterr()
        rows = read_csv(out)
        assert [r["user"] for r in rows] == ["1", "2"]
        lam = [float(r["lambda"]) for r in rows]
        assert lam[0] == pytest.approx(lam[1], rel=1e-4)
        for r in rows:
            assert abs(float(r["residual_rel"])) <= 1e-4
            assert r["mode"] == "corrected"


class TestBoundaryCommand:
    def test_grid_times_modes_row_count(self, tmp_path, capsys):
        out = tmp_path / "boundary.csv"
        path = write_config(tmp_path, {
            "mu": {"resolution": 10},
            "mode": "both",
            "output": str(out),
        })
        assert main(["boundary", "--config", path]) == 0
        capsys.readouterr()
        rows = read_csv(out)
        assert len(rows) == 18
        assert sum(r["mode"] == "corrected" for r in rows) == 9
        assert sum(r["mode"] == "naive" for r in rows) == 9
        assert all(r["status"] == "ok" for r in rows)
        header = list(rows[0].keys())
        assert header == ["mode", "mu_1", "mu_2", "lambda_1", "lambda_2",
                          "R_1", "R_2", "Pach_1", "Pach_2",
                          "quad_err", "solver_iters", "status"]

    def test_single_user_single_row(self, tmp_path, capsys):
        out = tmp_path / "b1.csv"
        overrides = {
            "channel": {"sigma2": 1.0,
                        "users": [{"fading": {"kind": "exponential", "mean": 1.0},
                                   "pbar": 1.0}]},
            "mu": {"resolution": 1},
            "output": str(out),
        }
        path = write_config(tmp_path, overrides)
        assert main(["boundary", "--config", path]) == 0
        capsys.readouterr()
        rows = read_csv(out)
        assert len(rows) == 1
        assert float(rows[0]["mu_1"]) == 1.0

    def test_bits_units_divide_by_ln2(self, tmp_path, capsys):
        overrides = {
            "channel": {"sigma2": 1.0,
                        "users": [{"fading": {"kind": "exponential", "mean": 1.0},
                                   "pbar": 1.0}]},
            "mu": {"resolution": 1},
        }
        out_nats = tmp_path / "nats.csv"
        out_bits = tmp_path / "bits.csv"
        path = write_config(tmp_path, overrides)
        assert main(["boundary", "--config", path, "--output", str(out_nats)]) == 0
        assert main(["boundary", "--config", path, "--output", str(out_bits),
                     "--units", "bits"]) == 0
        capsys.readouterr()
        nats = float(read_csv(out_nats)[0]["R_1"])
        bits = float(read_csv(out_bits)[0]["R_1"])
        assert bits == pytest.approx(nats / math.log(2.0), rel=1e-12)


class TestVerifyMcCommand:
    def test_corrected_mode_passes(self, tmp_path, capsys):
        out = tmp_path / "vmc.csv"
        path = write_config(tmp_path, {"output": str(out)})
        assert main(["verify-mc", "--config", path]) == 0
        capsys.readouterr()
        rows = read_csv(out)
        assert len(rows) == 4  # 2 users x (rate, power)
        for r in rows:
            assert abs(float(r["z_score"])) <= 4.0

    def test_naive_mode_fails_verification(self, tmp_path, capsys):
        out = tmp_path / "vmc_naive.csv"
        path = write_config(tmp_path, {"mode": "naive", "output": str(out)})
        assert main(["verify-mc", "--config", path]) == 3
        capsys.readouterr()
        rows = read_csv(out)
        worst = max(abs(float(r["z_score"])) for r in rows)
        assert worst > 4.0

    def test_equal_weights_naive_passes(self, tmp_path, capsys):
        out = tmp_path / "vmc_eq.csv"
        path = write_config(tmp_path, {"mode": "naive", "mu": [0.5, 0.5],
                                       "output": str(out)})
        assert main(["verify-mc", "--config", path]) == 0
        capsys.readouterr()


class TestCompareCommand:
    def test_gap_report(self, tmp_path, capsys):
        out = tmp_path / "cmp.csv"
        path = write_config(tmp_path, {"output": str(out)})
        assert main(["compare", "--config", path]) == 0
        capsys.readouterr()
        rows = read_csv(out)
        assert len(rows) == 2
        assert float(rows[0]["same_lambda_gap_abs"]) > 0.01
        assert abs(float(rows[1]["same_lambda_gap_abs"])) <= 1e-8


class TestDumpConfig:
    def test_dump_reflects_overrides_and_reparses(self, tmp_path, capsys):
        path = write_config(tmp_path)
        assert main(["solve", "--config", path, "--dump-config",
                     "--mode", "naive", "--units", "bits", "--threads", "3"]) == 0
        dumped = capsys.readouterr().out
        doc = json.loads(dumped)
        assert doc["mode"] == "naive"
        assert doc["units"] == "bits"
        assert doc["threads"] == 3
        reparsed = parse_config(doc, tmp_path)
        assert reparsed.mode == "naive"
        assert isinstance(reparsed.mu, RateAwardVector)

    def test_full_precision_numbers(self, tmp_path, capsys):
        path = write_config(tmp_path, {"mu": [1.0 / 3.0, 2.0 / 3.0]})
        assert main(["solve", "--config", path, "--dump-config"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mu"][0] == 1.0 / 3.0
