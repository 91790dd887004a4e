import csv
import json
from pathlib import Path

import pytest

from magspec import cli
from magspec.errors import ConfigError, NoConvergence

GOLDEN = Path(__file__).parent / "golden"


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def golden(name):
    return header(GOLDEN / f"{name}_header.csv")


def write(tmp_path, config, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def circle_config(**extra):
    return {
        "schema_version": 1,
        "name": "circle",
        "task": "convergence",
        "seed": 2,
        "domain": {"kind": "circle", "length": 6.283185307179586},
        "potential": {"kind": "harmonic-flux", "flux": [0.3]},
        "solver": {"grid": [64, 128, 256], "eigs": 3, "tol": 1e-11},
        **extra,
    }


class TestValidation:
    @pytest.mark.parametrize("name", cli.bundled_configs())
    def test_bundled_configs_validate_or_are_rejected_for_a_reason(self, name):
        config = cli.load_config(name)
        if name == "rectangle_shikegawa.json":
            with pytest.raises(ConfigError, match="homology"):
                cli.validate_config(config)
        else:
            cli.validate_config(config)

    @pytest.mark.parametrize(
        "patch",
        [
            {"schema_version": 2},
            {"task": "dance"},
            {"solver": {"grid": [100]}},
            {"domain": {"kind": "circle", "theta": "1 + import(t)"}},
            {"potential": {"kind": "harmonic-flux", "flux": [0.5, 0.5]}},
            {"domain": {"kind": "torus"}},
        ],
    )
    def test_invalid_configs(self, patch):
        with pytest.raises(ConfigError):
            cli.validate_config({**circle_config(), **patch})

    def test_hash_is_reproducible_and_order_independent(self):
        a = circle_config()
        b = dict(reversed(list(a.items())))
        assert cli.config_hash(a) == cli.config_hash(b)
        assert len(cli.config_hash(a)) == 64
        assert cli.config_hash(a) != cli.config_hash({**a, "seed": 3})

    def test_grid_override_ladders(self):
        args = cli.build_parser().parse_args(["run", "x.json", "--grid", "128"])
        assert cli.apply_overrides(circle_config(), args)["solver"]["grid"] == [16, 32, 64, 128]
        bounds = {**circle_config(), "task": "bounds"}
        assert cli.apply_overrides(bounds, args)["solver"]["grid"] == [64, 128]
        bad = cli.build_parser().parse_args(["run", "x.json", "--grid", "100"])
        with pytest.raises(ConfigError):
            cli.apply_overrides(circle_config(), bad)


class TestRun:
    def test_torus_sharpness_bundled(self, tmp_path, capsys):
        code = cli.main(["run", "torus_sharpness.json", "--grid", "32", "--out", str(tmp_path), "--no-figures"])
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "torus_sharpness_reports.csv")))
        assert header(tmp_path / "torus_sharpness_reports.csv") == golden("reports")
        assert header(tmp_path / "torus_sharpness_spectra.csv") == golden("spectra")
        sharp = next(r for r in rows if r["name"] == "TorusSharpness")
        assert abs(float(sharp["margin"])) < 1e-6 and sharp["verdict"] == "pass"
        env = json.loads((tmp_path / "torus_sharpness.json").read_text())
        assert env["schema_version"] == 1 and env["status"] == "pass"
        assert env["config_hash"] == cli.config_hash(env["config"])
        assert "TorusSharpness" in capsys.readouterr().out

    def test_convergence_subcommand_and_figures(self, tmp_path):
        path = write(tmp_path, circle_config())
        assert cli.main(["convergence", path, "--out", str(tmp_path)]) == 0
        assert header(tmp_path / "circle_convergence.csv") == golden("convergence")
        assert (tmp_path / "circle_convergence.png").stat().st_size > 0
        assert (tmp_path / "circle_spectra.png").exists()

    def test_json_byte_identical_modulo_timings(self, tmp_path):
        path = write(tmp_path, circle_config())
        outs = []
        for k, jobs in enumerate(("1", "3")):
            out = tmp_path / f"o{k}"
            assert cli.main(["run", path, "--out", str(out), "--format", "json", "--no-figures", "--jobs", jobs]) == 0
            env = json.loads((out / "circle.json").read_text())
            env.pop("timings")
            outs.append(json.dumps(env, sort_keys=True))
        assert outs[0] == outs[1]

    def test_failing_check_exits_one(self, tmp_path):
        path = write(tmp_path, circle_config(order_window=[3.0, 4.0]))
        assert cli.main(["run", path, "--out", str(tmp_path), "--no-figures"]) == 1
        env = json.loads((tmp_path / "circle.json").read_text())
        assert env["status"] == "fail" and env["checks"]["order_window"] is False

    def test_simply_connected_shikegawa_exits_two(self, tmp_path, capsys):
        assert cli.main(["run", "rectangle_shikegawa.json", "--out", str(tmp_path)]) == 2
        assert "homology" in capsys.readouterr().err

    def test_oracle_unavailable_exits_two(self, tmp_path, capsys):
        assert cli.main(["convergence", "product_cylinder.json", "--out", str(tmp_path)]) == 2
        assert "closed-form" in capsys.readouterr().err

    def test_missing_and_malformed_files(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.json")]) == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["run", str(bad)]) == 2

    def test_no_convergence_exits_three(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NoConvergence(7, 1e-3)

        monkeypatch.setattr("magspec.experiments.smallest_eigs", boom)
        path = write(tmp_path, circle_config())
        assert cli.main(["run", path, "--out", str(tmp_path)]) == 3
        assert "did not converge" in capsys.readouterr().err

    def test_jobs_environment_fallback(self, tmp_path, monkeypatch):
        path = write(tmp_path, circle_config())
        monkeypatch.setenv("MAGSPEC_JOBS", "2")
        assert cli.main(["run", path, "--out", str(tmp_path), "--no-figures"]) == 0
        monkeypatch.setenv("MAGSPEC_JOBS", "many")
        assert cli.main(["run", path, "--out", str(tmp_path), "--no-figures"]) == 2

    def test_sweep_csv(self, tmp_path):
        config = {
            "schema_version": 1, "name": "sweep", "task": "sweep", "seed": 1,
            "domain": {"kind": "circle"}, "potential": {"kind": "harmonic-flux", "flux": [0.0]},
            "solver": {"grid": [128], "eigs": 1, "tol": 1e-11},
            "fluxes": [0.0, 0.25, 0.5, 0.75, 1.0],
        }
        assert cli.main(["run", write(tmp_path, config), "--out", str(tmp_path)]) == 0
        assert header(tmp_path / "sweep_sweep.csv") == golden("sweep")
        assert (tmp_path / "sweep_sweep.png").exists()

    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        assert "torus_sharpness.json" in capsys.readouterr().out


def test_degeneration_header_matches_golden():
    from magspec.experiments import run_degenerate

    cfg = {"schema_version": 1, "task": "degenerate", "seed": 1,
           "domain": {"kind": "example1", "eps": [0.4, 0.3], "cells_per_unit": 10},
           "potential": {"kind": "harmonic-flux", "flux": [0.5]}, "solver": {"eigs": 1, "tol": 1e-10}}
    res = run_degenerate(cfg)
    assert res.tables["degeneration"]["columns"] == golden("degeneration")
    assert res.checks["strictly_decreasing"]
