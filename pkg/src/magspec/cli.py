"""Command line front end: ``magspec run CONFIG`` and ``magspec convergence CONFIG``.

Exit codes: 0 success with every verdict passing, 1 a verdict or check failed,
2 configuration error, 3 solver non-convergence.
"""

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bounds import CSV_COLUMNS, REPORT_NAMES
from .errors import ConfigError, MagspecError, NoConvergence, OracleUnavailable
from .expr import Expression
from .experiments import DOMAIN_KINDS, SCHEMA_VERSION, TASKS, run_config

log = logging.getLogger("magspec")

GRID_SIZES = [16, 32, 64, 128, 256, 512, 1024]
_EXPR = {"type": ["string", "number"]}
_CURVE = {
    "type": "object",
    "required": ["shape"],
    "properties": {
        "shape": {"enum": ["circle", "offset-circle", "ellipse", "rounded-rectangle", "points"]},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "height": {"type": "number", "exclusiveMinimum": 0},
        "center": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
    },
}
CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "task", "domain", "potential"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "task": {"enum": list(TASKS)},
        "seed": {"type": "integer", "minimum": 0},
        "domain": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(DOMAIN_KINDS)},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "height": {"type": "number", "exclusiveMinimum": 0},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "theta": _EXPR,
                "warp": _EXPR,
                "aspect": {"type": "number", "exclusiveMinimum": 0},
                "periods": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "inner": _CURVE,
                "outer": _CURVE,
                "curve_nodes": {"enum": [256, 512, 1024, 2048, 4096]},
                "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2}},
                "cells_per_unit": {"type": "integer", "minimum": 4},
            },
        },
        "potential": {
            "oneOf": [
                {"type": "object", "required": ["kind", "flux"], "properties": {
                    "kind": {"const": "harmonic-flux"},
                    "flux": {"type": "array", "items": {"type": "number"}}}},
                {"type": "object", "required": ["kind"], "properties": {
                    "kind": {"enum": ["closed-form", "general"]}, "Hr": _EXPR, "Ht": _EXPR}},
                {"type": "object", "required": ["kind", "phi"], "properties": {
                    "kind": {"const": "exact"}, "phi": _EXPR}},
            ]
        },
        "solver": {
            "type": "object",
            "properties": {
                "grid": {"type": "array", "items": {"enum": GRID_SIZES}, "minItems": 1},
                "eigs": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["auto", "dense", "lobpcg"]},
                "preconditioner": {"enum": ["jacobi", "factorized", "none"]},
                "dense_max": {"type": "integer", "minimum": 1},
            },
        },
        "bounds": {"type": "array", "items": {"enum": list(REPORT_NAMES)}},
        "fluxes": {"type": "array", "items": {"type": "number"}},
        "bound_tol": {"type": "number", "minimum": 0},
        "sweep_tol": {"type": "number", "minimum": 0},
        "order_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["csv", "json", "both"]},
                           "figures": {"type": "boolean"}},
        },
    },
}

SPECTRA_COLUMNS = ("label", "grid", "k", "eigenvalue", "residual")


def bundled_configs():
    """Names of the example configs shipped with the package."""
    return sorted(p.name for p in resources.files("magspec.configs").iterdir() if p.name.endswith(".json"))


def load_config(path):
    path = str(path)
    if not os.path.exists(path):
        candidate = resources.files("magspec.configs") / path
        if candidate.is_file():
            return json.loads(candidate.read_text())
        raise ConfigError(f"config {path!r} not found")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def validate_config(config):
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    dom, pot = config["domain"], config["potential"]
    for key in ("theta", "warp"):
        if key in dom:
            Expression(dom[key])
    for key in ("Hr", "Ht", "phi"):
        if key in pot:
            Expression(pot[key])
    kind = dom["kind"]
    required = {"torus": ["periods"], "annulus": ["inner", "outer"], "rectangle": ["width", "height"]}
    for key in required.get(kind, []):
        if key not in dom:
            raise ConfigError(f"domain kind {kind!r} needs {key!r}")
    if pot["kind"] == "harmonic-flux":
        n_gen = {"circle": 1, "cylinder": 1, "annulus": 1, "example1": 1, "rectangle": 0,
                 "torus": len(dom.get("periods", []))}[kind]
        if len(pot["flux"]) != n_gen:
            raise ConfigError(
                f"{len(pot['flux'])} flux values given but domain {kind!r} has {n_gen} homology generators"
            )
    if "Shikegawa" in config.get("bounds", []) and kind == "rectangle":
        raise ConfigError("Shikegawa check needs a homology generator; the domain is simply connected")
    return config


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def apply_overrides(config, args):
    config = copy.deepcopy(config)
    solver = config.setdefault("solver", {})
    if getattr(args, "grid", None):
        n = int(args.grid)
        if n not in GRID_SIZES:
            raise ConfigError(f"--grid must be a power of two in [16, 1024], got {n}")
        if config["task"] == "convergence":
            solver["grid"] = [g for g in (n // 8, n // 4, n // 2, n) if g >= 16]
        elif config["task"] == "bounds":
            solver["grid"] = [g for g in (n // 2, n) if g >= 16]
        else:
            solver["grid"] = [n]
    if getattr(args, "eigs", None):
        solver["eigs"] = int(args.eigs)
    if getattr(args, "tol", None):
        solver["tol"] = float(args.tol)
    if getattr(args, "seed", None) is not None:
        config["seed"] = int(args.seed)
    return config


def _jobs(args):
    if getattr(args, "jobs", None):
        return max(1, int(args.jobs))
    env = os.environ.get("MAGSPEC_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MAGSPEC_JOBS must be an integer, got {env!r}") from None
    return 1


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def envelope(config, result, status):
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "magspec_version": __version__,
        "config": config,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "task": config["task"],
        "status": status,
        "spectra": result.spectra,
        "reports": [r.to_dict() for r in result.reports],
        "tables": result.tables,
        "checks": result.checks,
        "timings": result.timings,
    })


def write_outputs(config, result, out_dir, fmt, figures):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = config.get("name", config["task"])
    status = "pass" if result.ok else "fail"
    written = []
    if fmt in ("json", "both"):
        path = out / f"{name}.json"
        path.write_text(json.dumps(envelope(config, result, status), indent=2, sort_keys=True) + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        path = out / f"{name}_reports.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            w.writerows(r.csv_row() for r in result.reports)
        written.append(path)
        path = out / f"{name}_spectra.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SPECTRA_COLUMNS)
            for s in result.spectra:
                for k, (lam, res) in enumerate(zip(s["eigenvalues"], s["residuals"])):
                    w.writerow((s["label"], s["grid"], k + 1, f"{lam:.15g}", f"{res:.3e}"))
        written.append(path)
        for tname, table in result.tables.items():
            path = out / f"{name}_{tname}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(table["columns"])
                w.writerows(["" if v is None else v for v in row] for row in table["rows"])
            written.append(path)
    if figures:
        try:
            from .plotting import render_figures
        except ImportError as exc:  # pragma: no cover - matplotlib is a declared dependency
            log.warning("figures skipped: %s", exc)
        else:
            written.extend(render_figures(name, result, out))
    return written


def _summary(result, stream):
    for r in result.reports:
        print(f"{r.name:<20s} bound={r.bound:.6g} measured={r.measured:.6g} margin={r.margin:+.3e} {r.verdict}",
              file=stream)
    for k, v in result.checks.items():
        print(f"check {k:<24s} {'pass' if v else 'fail'}", file=stream)


def cmd_run(args, task_override=None):
    config = load_config(args.config)
    if task_override:
        config = {**config, "task": task_override}
    validate_config(config)
    config = apply_overrides(config, args)
    validate_config(config)
    out_cfg = config.get("output", {})
    out_dir = args.out or out_cfg.get("dir", "results")
    fmt = args.format or out_cfg.get("format", "both")
    figures = out_cfg.get("figures", True) if args.figures is None else args.figures
    result = run_config(config, jobs=_jobs(args))
    written = write_outputs(config, result, out_dir, fmt, figures)
    _summary(result, sys.stdout)
    for path in written:
        log.info("wrote %s", path)
    return 0 if result.ok else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="magspec", description="Spectra of magnetic Laplacians and bound certification.")
    parser.add_argument("--version", action="version", version=f"magspec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="config file, or the name of a bundled config")
        p.add_argument("--grid", type=int, help="finest grid size (power of two, 16..1024)")
        p.add_argument("--eigs", type=int, help="number of eigenpairs")
        p.add_argument("--tol", type=float, help="eigensolver residual tolerance")
        p.add_argument("--jobs", type=int, help="worker threads (default: $MAGSPEC_JOBS or 1)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["csv", "json", "both"])
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--figures", dest="figures", action="store_true", default=None,
                       help="render PNG figures next to the tables")
        p.add_argument("--no-figures", dest="figures", action="store_false")

    common(sub.add_parser("run", help="run the task named in the config"))
    common(sub.add_parser("convergence", help="refinement study against a closed-form spectrum"))
    sub.add_parser("list", help="list bundled configs")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            print("\n".join(bundled_configs()))
            return 0
        if args.command == "convergence":
            return cmd_run(args, task_override="convergence")
        return cmd_run(args)
    except (ConfigError, OracleUnavailable) as exc:
        print(f"magspec: configuration error: {exc}", file=sys.stderr)
        return 2
    except NoConvergence as exc:
        print(f"magspec: solver did not converge: {exc}", file=sys.stderr)
        return 3
    except MagspecError as exc:
        print(f"magspec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
