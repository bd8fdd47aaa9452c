"""Batch command line: ``wavelsq {solve,sweep,probe-contraction,check} <config>``.

Exit codes: 0 success, 2 subproblem failure, 3 method divergence, 4 configuration error.
Outputs go to ``<root>/<run.output_dir>`` where the root is the config
file's directory unless ``WAVELSQ_OUTPUT_ROOT`` is set.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import platform
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .baselines import BaselineResult, contraction_probe, newton_iterate, picard_iterate, variant_iterate
from .config import RunConfig, parse_config
from .diagnostics import convergence_order, decay_bound_check
from .errors import (ConvergenceError, DivergenceError, GeometryError, MaxIterError, ParseError, ResolutionError,
                     StabilityError, StagnationError, ValidationError)
from .grid import Setup, norms, v_norm
from .hum import steer
from .lsq import ControlledPair, deviation_tolerance, error_functional, make_initial_pair, replay, solve

log = logging.getLogger("wavelsq")

EXIT_OK, EXIT_SUBPROBLEM, EXIT_DIVERGED, EXIT_CONFIG = 0, 2, 3, 4
OUTPUT_ROOT_ENV = "WAVELSQ_OUTPUT_ROOT"
ITER_HEADER = ["k", "E", "lambda", "dir_norm", "y_inf", "deriv_err", "cg_iters", "cg_res"]

_EXIT_FOR = [
    ((ParseError, ValidationError, GeometryError, ResolutionError), EXIT_CONFIG, "config_error"),
    ((ConvergenceError, StagnationError), EXIT_SUBPROBLEM, "subproblem_failure"),
    ((StabilityError, DivergenceError, MaxIterError), EXIT_DIVERGED, "diverged"),
]


def fmt(v) -> str:
    """Deterministic text for CSV cells: integers as-is, floats round-trip exact."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(path: Path, manifest: dict) -> None:
    _atomic_write(path, json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n")


def output_dir(cfg: RunConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV) or cfg.base_dir)
    return root / cfg.run["output_dir"]


def versions() -> dict:
    return {"wavelsq": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_snapshot(out: Path, setup: Setup, k: int, pair: ControlledPair) -> None:
    """Long format: one row per (node, time level) with columns x, t, y, f."""
    x, t = setup.x, setup.t
    rows = ((x[i], t[n], pair.y[i, n], pair.f[i, n]) for i in range(setup.nx) for n in range(setup.nt + 1))
    write_csv(out / f"snapshot_k{k:04d}.csv", ["x", "t", "y", "f"], rows)


# Method runners -----------------------------------------------------------------
# Each returns (status, rows, header, extra-manifest, final pair or None).


def _run_lsq(cfg, setup, nl, init, target, scfg, out):
    wanted = set(cfg.run["snapshots"])

    def snap(k, pair):
        if k in wanted:
            write_snapshot(out, setup, k, pair)

    res = solve(setup, nl, init, target, scfg, callback=snap)
    rows = [(r.k, r.E, r.lam, r.dir_norm, r.y_inf, r.deriv_err, r.cg_iters, r.cg_res) for r in res.records]
    order = convergence_order(res.energies)
    decay = decay_bound_check(res.records, res.energies, nl, setup.T, scfg.m)
    extra = {
        "iterations": len(res.records),
        "energies": res.energies,
        "convergence_order": {"orders": order.orders, "steps": order.steps, "floor": order.floor},
        "decay_bound": {"label": "prediction with empirical C", "C_emp": decay.C_emp, "c": decay.c,
                        "k0": decay.k0, "M_obs": decay.M_obs, "all_hold": decay.all_hold,
                        "lambda_predicted": [r.lam_predicted for r in decay.rows]},
        "wall_times": [r.wall_time for r in res.records],
    }
    return "success", rows, ITER_HEADER, extra, res.pair


def _baseline_rows(res: BaselineResult):
    # dir_norm carries the sup-norm increment |y_{k+1} - y_k|; deriv_err does not apply.
    return [(r.k, r.E, r.lam, r.increment, r.y_inf, math.nan, r.cg_iters, r.cg_res, res.method)
            for r in res.records]


def _run_baseline(method, cfg, setup, nl, init, target, scfg, out):
    if method == "picard":
        res = picard_iterate(setup, nl, init, target, scfg, max_iters=scfg.max_iters)
    elif method == "newton":
        res = newton_iterate(setup, nl, init, target, scfg)
    else:
        res = variant_iterate(setup, nl, init, target, scfg)
    for rec_k in cfg.run["snapshots"]:
        if res.pair is not None and rec_k == len(res.records):
            write_snapshot(out, setup, rec_k, res.pair)
    extra = {"iterations": len(res.records), "increments": [r.increment for r in res.records],
             "message": res.message}
    status = {"success": "success", "diverged": "diverged", "max_iters": "diverged"}[res.status]
    return status, _baseline_rows(res), ITER_HEADER + ["method"], extra, res.pair


def _run_linear(cfg, setup, nl, init, target, scfg, out):
    pair = make_initial_pair(setup, nl, init, target, scfg)
    rows = [(0, error_functional(setup, pair), 1.0, math.nan, float(np.max(np.abs(pair.y))), math.nan, 0,
             math.nan, "linear")]
    if 0 in cfg.run["snapshots"]:
        write_snapshot(out, setup, 0, pair)
    return "success", rows, ITER_HEADER + ["method"], {"iterations": 0}, pair


def execute(cfg: RunConfig, out: Path | None = None) -> tuple[int, dict]:
    """Run one configuration, write its outputs, and return (exit code, manifest)."""
    out = out or output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    started, t0 = _now(), time.perf_counter()
    method = cfg.solver["method"]
    manifest = {"config": cfg.echo(), "versions": versions(), "method": method, "start": started}
    code, status = EXIT_OK, "success"
    try:
        setup = cfg.build_setup()
        manifest["grid_hash"] = setup.grid_hash()
        manifest["grid"] = {"nx": setup.nx, "nt": setup.nt, "dx": setup.dx, "dt": setup.dt}
        nl = cfg.build_nonlinearity()
        init, target = cfg.build_data(setup)
        scfg = cfg.build_solver_config()
        if method == "lsq":
            runner = _run_lsq
        elif method == "linear":
            runner = _run_linear
        else:
            def runner(*a):
                return _run_baseline(method, *a)
        status, rows, header, extra, pair = runner(cfg, setup, nl, init, target, scfg, out)
        write_csv(out / "iterations.csv", header, rows)
        manifest.update(extra)
        if pair is not None:
            manifest["final_E"] = error_functional(setup, pair)
            manifest["control_norm"] = norms(setup, pair.f).l2_qT
            if method == "linear":
                sol = steer(setup, None, None, init, target, tol=scfg.cg_tol, maxit=scfg.cg_maxit,
                            spectral_filter=scfg.spectral_filter)
                manifest["final_deviation"] = sol.final_deviation
                manifest["relative_deviation"] = sol.final_deviation / max(v_norm(setup, init), 1e-300)
            else:
                try:
                    manifest["final_deviation"] = replay(setup, pair)[1]
                except StabilityError as exc:
                    manifest["final_deviation"] = math.inf
                    manifest["replay_error"] = str(exc)
            manifest["deviation_tolerance"] = deviation_tolerance(setup, pair, scfg)
        if status == "diverged":
            code = EXIT_DIVERGED
    except Exception as exc:  # mapped to documented exit codes
        for types, c, st in _EXIT_FOR:
            if isinstance(exc, types):
                code, status = c, st
                break
        else:
            raise
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        log.error("%s", manifest["error"])
    manifest.update(status=status, exit_code=code, end=_now(), wall_time=time.perf_counter() - t0)
    write_manifest(out / "manifest.json", manifest)
    return code, manifest


def sweep(cfg: RunConfig, out: Path | None = None) -> int:
    """Cartesian product of the [sweep] lists (keys sorted), one subdirectory per run."""
    out = out or output_dir(cfg)
    keys = sorted(cfg.sweep)
    if not keys:
        raise ValidationError("sweep: no parameter lists declared in [sweep]")
    combos = list(itertools.product(*(cfg.sweep[k] for k in keys)))
    rows, worst = [], EXIT_OK
    for i, values in enumerate(combos):
        sub = cfg.with_overrides(dict(zip(keys, values)))
        code, man = execute(sub, out / f"run_{i:04d}")
        worst = max(worst, code)
        rows.append([i, *values, man["status"], code, man.get("iterations", 0),
                     man.get("final_E", math.nan), man.get("control_norm", math.nan),
                     man.get("final_deviation", math.nan)])
    write_csv(out / "summary.csv", ["run", *keys, "status", "exit_code", "iterations", "final_E",
                                    "control_norm", "final_deviation"], rows)
    return worst


def probe(cfg: RunConfig, out: Path | None = None) -> int:
    out = out or output_dir(cfg)
    setup = cfg.build_setup()
    nl = cfg.build_nonlinearity()
    init, target = cfg.build_data(setup)
    scfg = cfg.build_solver_config()
    started, t0 = _now(), time.perf_counter()
    rep = contraction_probe(setup, nl, float(cfg.probe["M_ball"]), int(cfg.probe["trials"]), init, target, scfg,
                            seed=int(cfg.run["seed"]))
    write_csv(out / "contraction.csv", ["trial", "ratio", "map_gap", "potential_gap"],
              [(i, r, g, p) for i, (r, g, p) in enumerate(zip(rep.ratios, rep.map_gaps, rep.potential_gaps))])
    write_manifest(out / "manifest.json", {
        "config": cfg.echo(), "versions": versions(), "grid_hash": setup.grid_hash(), "start": started,
        "end": _now(), "wall_time": time.perf_counter() - t0, "status": "success", "exit_code": EXIT_OK,
        "rho_max": rep.rho_max, "slope": rep.slope, "r_squared": rep.r_squared})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavelsq", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "run one configuration"), ("sweep", "run the [sweep] parameter grid"),
                       ("probe-contraction", "measure the Picard contraction ratio"),
                       ("check", "validate a configuration without running it")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.command == "check":
            print(f"{args.config}: ok")
            return EXIT_OK
        if args.command == "solve":
            code, man = execute(cfg)
            print(f"{man['status']}: exit {code}, output in {output_dir(cfg)}")
            return code
        if args.command == "sweep":
            return sweep(cfg)
        return probe(cfg)
    except (ParseError, ValidationError, GeometryError, ResolutionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, StagnationError) as exc:
        print(f"subproblem failure: {exc}", file=sys.stderr)
        return EXIT_SUBPROBLEM


if __name__ == "__main__":
    sys.exit(main())
