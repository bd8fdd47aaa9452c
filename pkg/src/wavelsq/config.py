"""Run configuration: TOML parsing, validation and data profiles.

A configuration file has the tables ``[grid]``, ``[nonlinearity]``,
``[data]``, ``[solver]``, ``[run]`` and optionally ``[probe]`` and
``[sweep]``.  Every table and every key is optional; missing values take
the defaults below.  Example::

    [grid]
    nx = 63
    T = 2.5
    omega = [0.2, 0.8]

    [nonlinearity]
    family = "sine"
    a = 5.0

    [data]
    init = "sine1"
    target = "zero"

    [solver]
    method = "lsq"
"""
from __future__ import annotations

import copy
import inspect
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .grid import Setup, StateSlice, build_setup
from .lsq import SolverConfig
from .nonlinearity import BUILTINS, Nonlinearity, _replace, with_offset

METHODS = ("lsq", "picard", "newton", "variant", "linear")
_BUMP = re.compile(r"^bump\(\s*([^,]+),\s*([^,]+),\s*([^)]+)\)$")

DEFAULTS: dict[str, dict[str, Any]] = {
    "grid": {"nx": 63, "T": 2.5, "omega": [0.2, 0.8], "cfl_target": 0.9},
    "nonlinearity": {"family": "sine", "a": 5.0},
    "data": {"init": "sine1", "target": "zero"},
    "solver": {"method": "lsq", "m": 2.0, "tol_E": None, "tol_E_scale": 1e-16, "max_iters": 50,
               "cg_tol": 1e-10, "cg_maxit": 2000, "ls_tol": 1e-4, "spectral_filter": False},
    "run": {"seed": 0, "output_dir": "run", "snapshots": []},
    "probe": {"M_ball": 1.0, "trials": 10},
}

_NL_OVERRIDES = ("s", "holder_seminorm", "alpha", "beta", "offset")


@dataclass
class RunConfig:
    grid: dict
    nonlinearity: dict
    data: dict
    solver: dict
    run: dict
    probe: dict
    sweep: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        """Copy with dotted ``table.key`` overrides applied, then re-validated."""
        new = copy.deepcopy(self)
        for dotted, value in overrides.items():
            table, _, key = dotted.partition(".")
            if not key or table not in DEFAULTS:
                raise ValidationError(f"sweep.{dotted}: expected '<table>.<key>' with a known table")
            getattr(new, table)[key] = value
        new.sweep = {}
        validate(new)
        return new

    # Builders -----------------------------------------------------------

    def build_setup(self) -> Setup:
        g = self.grid
        return build_setup(int(g["nx"]), float(g["T"]), tuple(g["omega"]), float(g["cfl_target"]))

    def build_nonlinearity(self) -> Nonlinearity:
        return make_nonlinearity(self.nonlinearity)

    def build_solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(m=float(s["m"]), tol_E=None if s["tol_E"] is None else float(s["tol_E"]),
                            max_iters=int(s["max_iters"]), cg_tol=float(s["cg_tol"]), cg_maxit=int(s["cg_maxit"]),
                            ls_tol=float(s["ls_tol"]), spectral_filter=bool(s["spectral_filter"]),
                            tol_E_scale=float(s["tol_E_scale"]))

    def build_data(self, setup: Setup) -> tuple[StateSlice, StateSlice]:
        return (resolve_profile(self.data["init"], setup, self.base_dir, "data.init"),
                resolve_profile(self.data["target"], setup, self.base_dir, "data.target"))


def make_nonlinearity(spec: dict) -> Nonlinearity:
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in BUILTINS:
        raise ValidationError(f"nonlinearity.family={family!r}: expected one of {', '.join(sorted(BUILTINS))}")
    overrides = {k: spec.pop(k) for k in _NL_OVERRIDES if k in spec}
    factory = BUILTINS[family]
    try:
        inspect.signature(factory).bind(**spec)
    except TypeError:
        params = ", ".join(inspect.signature(factory).parameters) or "none"
        raise ValidationError(f"nonlinearity: bad parameters {sorted(spec)} for family {family!r} "
                              f"(accepted: {params})") from None
    for k, v in spec.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ValidationError(f"nonlinearity.{k}: expected a number, got {v!r}")
    nl = factory(**{k: float(v) for k, v in spec.items()})
    repl = {}
    if "s" in overrides:
        repl["s"] = float(overrides["s"])
    if "holder_seminorm" in overrides:
        repl["holder_seminorm"] = float(overrides["holder_seminorm"])
        repl["holder_is_estimate"] = False
    if "alpha" in overrides:
        repl["growth_alpha"] = float(overrides["alpha"])
    if "beta" in overrides:
        repl["growth_beta"] = float(overrides["beta"])
    if repl:
        nl = _replace(nl, **repl)
    return with_offset(nl, float(overrides.get("offset", 0.0)))


def resolve_profile(value: str, setup: Setup, base_dir: Path, where: str) -> StateSlice:
    """Named profile ("sine1", "zero", "bump(c,w,a)") or a node-value file ("file:<path>").

    A node-value file holds nx rows of ``position,velocity`` (comment lines
    starting with ``#`` are skipped).
    """
    x = setup.x
    zero = np.zeros(setup.nx)
    if not isinstance(value, str):
        raise ValidationError(f"{where}: expected a profile name, got {value!r}")
    v = value.strip()
    if v == "zero":
        return StateSlice(zero, zero.copy())
    if v == "sine1":
        return StateSlice(np.sin(np.pi * x), zero)
    m = _BUMP.match(v)
    if m:
        try:
            c, w, a = (float(t) for t in m.groups())
        except ValueError:
            raise ValidationError(f"{where}: bump arguments must be numbers: {value!r}") from None
        if w <= 0:
            raise ValidationError(f"{where}: bump width must be positive")
        bump = np.where(np.abs(x - c) < w, a * np.cos(0.5 * np.pi * (x - c) / w) ** 2, 0.0)
        return StateSlice(bump, zero)
    if v.startswith("file:"):
        path = Path(v[5:])
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ValidationError(f"{where}: node-value file {path} not found")
        try:
            arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except ValueError as exc:
            raise ValidationError(f"{where}: cannot read {path}: {exc}") from None
        if arr.shape != (setup.nx, 2) or not np.all(np.isfinite(arr)):
            raise ValidationError(f"{where}: {path} must hold {setup.nx} finite rows 'position,velocity'")
        return StateSlice(arr[:, 0].copy(), arr[:, 1].copy())
    raise ValidationError(f"{where}: unknown profile {value!r} (use sine1, zero, bump(c,w,a) or file:<path>)")


def _merge(raw: dict) -> dict:
    out = {}
    for table, defaults in DEFAULTS.items():
        given = raw.get(table, {})
        if not isinstance(given, dict):
            raise ValidationError(f"[{table}] must be a table")
        if table == "nonlinearity" and "family" in given:
            merged = dict(given)
        else:
            merged = {**defaults, **given}
            unknown = set(given) - set(defaults)
            if unknown:
                raise ValidationError(f"{table}.{sorted(unknown)[0]}: unknown key")
        out[table] = merged
    extra = set(raw) - set(DEFAULTS) - {"sweep"}
    if extra:
        raise ValidationError(f"[{sorted(extra)[0]}]: unknown table")
    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ValidationError("[sweep] must be a table")
    out["sweep"] = _flatten(sweep)
    return out


def _flatten(sweep: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in sweep.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list) and v:
            out[key] = v
        else:
            raise ValidationError(f"sweep.{key}: expected a non-empty list of values")
    return out


def validate(cfg: RunConfig) -> None:
    g = cfg.grid
    try:
        nx = int(g["nx"])
        T = float(g["T"])
        omega = [float(w) for w in g["omega"]]
        cfl = float(g["cfl_target"])
    except (TypeError, ValueError):
        raise ValidationError("grid: nx, T, omega and cfl_target must be numbers") from None
    if nx != g["nx"] or nx < 4:
        raise ValidationError(f"grid.nx={g['nx']!r}: expected an integer >= 4")
    if len(omega) != 2 or not 0.0 <= omega[0] < omega[1] <= 1.0:
        raise ValidationError(f"grid.omega={g['omega']!r}: expected [l1, l2] with 0 <= l1 < l2 <= 1")
    if not T > 2.0 * max(omega[0], 1.0 - omega[1]):
        raise ValidationError(f"grid.T={T}: must exceed 2*max(l1, 1-l2)")
    if not 0.0 < cfl < 1.0:
        raise ValidationError(f"grid.cfl_target={cfl}: expected a value in (0, 1)")
    make_nonlinearity(cfg.nonlinearity)
    s = cfg.solver
    if s["method"] not in METHODS:
        raise ValidationError(f"solver.method={s['method']!r}: expected one of {', '.join(METHODS)}")
    if not float(s["m"]) >= 1.0:
        raise ValidationError(f"solver.m={s['m']}: must be >= 1")
    for key in ("cg_tol", "ls_tol", "tol_E_scale"):
        if not float(s[key]) > 0:
            raise ValidationError(f"solver.{key}={s[key]}: must be positive")
    if s["tol_E"] is not None and not float(s["tol_E"]) > 0:
        raise ValidationError(f"solver.tol_E={s['tol_E']}: must be positive")
    for key in ("max_iters", "cg_maxit"):
        if not isinstance(s[key], int) or s[key] < 0:
            raise ValidationError(f"solver.{key}={s[key]!r}: expected a nonnegative integer")
    r = cfg.run
    if not isinstance(r["seed"], int):
        raise ValidationError(f"run.seed={r['seed']!r}: expected an integer")
    if not isinstance(r["snapshots"], list) or not all(isinstance(k, int) and k >= 0 for k in r["snapshots"]):
        raise ValidationError("run.snapshots: expected a list of nonnegative iteration indices")
    p = cfg.probe
    if not float(p["M_ball"]) > 0 or not isinstance(p["trials"], int) or p["trials"] < 1:
        raise ValidationError("probe: M_ball must be positive and trials a positive integer")
    setup = cfg.build_setup()
    cfg.build_data(setup)


def parse_text(text: str, base_dir: Path | None = None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc)) from None
    cfg = RunConfig(**_merge(raw), base_dir=base_dir or Path.cwd())
    validate(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        return parse_text(text, path.parent.resolve())
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None
