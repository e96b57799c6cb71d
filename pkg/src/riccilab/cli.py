"""Command-line front end: reproducible CSV/JSON runs of the flow laboratory.

Subcommands
-----------
catalog        dump the geometry catalog as JSON
curvature      curvature report for one left-invariant metric (JSON)
flow           integrate the coefficient flow and write a CSV trajectory
closed-form    evaluate a recorded exact solution on the same CSV grid
rescale-limit  deviation of the rescaled flow from the catalog soliton (CSV)
fit            power-law fit of one CSV column (JSON)
soliton-check  pointwise soliton residuals (JSON)
bundle-flow    torus-bundle flow diagnostics (CSV)
selftest       run the acceptance checks and print a pass/fail table

Floats are printed with 17 significant digits, so emitted CSV re-parses to
the exact in-memory doubles.  A JSON config document (--config) may carry
any of a subcommand's flag values under the flag's own name; explicit flags
override the file, and unknown keys are rejected.  All randomness is seeded
(see --rng-seed on bundle-flow); reruns with the same config are
byte-identical.

Exit codes: 0 success; 1 numerical failure, with partial output still
written; 2 usage or validation error; 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import config
from .algebra import GeometryClass, catalog_ids, load_catalog
from .curvature import curvature_report, max_abs_sectional
from .errors import CatalogError, ConfigurationError, NumericalError, ValidationError
from .flow import FlowProblem, closed_form, integrate
from .rescale import fit_power_law, normalizer_for, soliton_deviation
from .soliton import soliton_catalog, soliton_residual

__all__ = ["main"]


# ---------------------------------------------------------------------------
# formatting and small converters
# ---------------------------------------------------------------------------


def _g17(x: float) -> str:
    return "%.17g" % float(x)


def _csv_text(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_g17(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _emit(path: Optional[str], text: str) -> None:
    """Write the finished document in one shot (single writer per path)."""
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _c_str(v) -> str:
    return str(v)


def _c_float(v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {v!r}") from None


def _c_int(v) -> int:
    f = _c_float(v)
    if f != int(f):
        raise ConfigurationError(f"expected an integer, got {v!r}")
    return int(f)


def _c_floats(v) -> list:
    """Comma-separated list on the command line, or a JSON array in a config."""
    if isinstance(v, (list, tuple)):
        return [_c_float(x) for x in v]
    parts = [p.strip() for p in str(v).split(",")]
    parts = [p for p in parts if p]
    if not parts:
        raise ConfigurationError(f"expected a comma-separated list, got {v!r}")
    return [_c_float(p) for p in parts]


def _c_matrix(v) -> list:
    """Rows separated by ';', entries by ',' — or a nested JSON array."""
    if isinstance(v, (list, tuple)):
        rows = [[_c_float(x) for x in row] for row in v]
    else:
        rows = [[_c_float(x) for x in r.split(",")] for r in str(v).split(";") if r.strip()]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ConfigurationError(f"holonomy must be a square matrix, got {v!r}")
    return rows


# ---------------------------------------------------------------------------
# flag/config merging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Opt:
    name: str  # flag name, hyphenated
    conv: Callable
    default: object = None
    help: str = ""


_COMMON = (
    _Opt("out", _c_str, None, "output path (default: stdout)"),
    _Opt("config", _c_str, None, "JSON config document mirroring the flags"),
)

_PARAM_OPTS = (
    _Opt("k", _c_float, None, "class parameter k (a2/a3 families)"),
    _Opt("c", _c_float, None, "Einstein normalization c (h2/h3/h4/ch2)"),
)


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < explicit flags into one options dict."""
    spec: Sequence[_Opt] = args._opts
    raw = vars(args)
    file_vals: dict = {}
    cfg_path = raw.get("config")
    if cfg_path is not None:
        with open(cfg_path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {o.name for o in spec}
        for key, val in doc.items():
            name = key.replace("_", "-")
            if name == "config" or name not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            file_vals[name] = val
    opts = {}
    for o in spec:
        flag = raw.get(o.name.replace("-", "_"))
        if flag is not None:
            opts[o.name] = o.conv(flag)
        elif o.name in file_vals:
            opts[o.name] = o.conv(file_vals[o.name])
        else:
            opts[o.name] = o.default
    return opts


def _require(opts: dict, name: str):
    if opts.get(name) is None:
        raise ConfigurationError(f"missing required option --{name}")
    return opts[name]


def _load_class(opts: dict) -> GeometryClass:
    name = _require(opts, "class")
    params = {}
    for p in ("k", "c"):
        if opts.get(p) is not None:
            params[p] = opts[p]
    return load_catalog(name, **params)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_catalog(opts: dict) -> int:
    docs = []
    for cid in catalog_ids():
        gc = load_catalog(cid)
        init = np.asarray(gc.default_init, dtype=float)
        soliton = None
        if gc.soliton_id is not None:
            spec = soliton_catalog(gc)
            soliton = {
                "id": spec.id,
                "weights": spec.weights.tolist(),
                "scale_at_unit_time": spec.scale.tolist(),
                "exponents": (1.0 - 2.0 * spec.weights).tolist(),
            }
        asym = None
        if gc.asymptotics is not None:
            asym = [
                {
                    "index": a.index,
                    "exponent": a.exponent,
                    "coefficient": a.predicted(init, gc.params),
                }
                for a in gc.asymptotics
            ]
        docs.append(
            {
                "id": gc.id,
                "dim": gc.dim,
                "coefficients": gc.ncoeff,
                "structure_constants": gc.algebra.c.tolist() if gc.is_lie else None,
                "default_init": list(gc.default_init),
                "params": dict(gc.params),
                "soliton": soliton,
                "asymptotics": asym,
                "notes": gc.notes,
            }
        )
    _emit(opts["out"], _json_text(docs))
    return 0


def _cmd_curvature(opts: dict) -> int:
    gc = _load_class(opts)
    coeff = _require(opts, "coeff")
    rep = curvature_report(gc, np.diag(coeff))
    doc = rep.as_dict()
    doc["max_abs_sectional"] = float(np.max(np.abs(rep.sectional)))
    _emit(opts["out"], _json_text(doc))
    return 0


def _trajectory_csv(gc: GeometryClass, times, coeffs, max_k) -> str:
    header = ["t"] + [f"c{i + 1}" for i in range(gc.ncoeff)] + ["max_abs_K", "t_max_abs_K"]
    rows = [
        [t, *c, k, t * k] for t, c, k in zip(np.asarray(times), np.asarray(coeffs), max_k)
    ]
    return _csv_text(header, rows)


def _cmd_flow(opts: dict) -> int:
    gc = _load_class(opts)
    init = opts["init"] if opts["init"] is not None else list(gc.default_init)
    problem = FlowProblem(
        geometry=gc,
        init=np.asarray(init, dtype=float),
        t0=opts["t0"],
        t1=opts["t1"],
        rtol=opts["rtol"],
        atol=opts["atol"],
        samples_per_decade=opts["samples-per-decade"],
        method=opts["method"],
    )
    traj = integrate(problem)
    _emit(opts["out"], _trajectory_csv(gc, traj.times, traj.coeffs, traj.max_k))
    if traj.terminated_reason != "completed":
        print(f"flow terminated early: {traj.terminated_reason}", file=sys.stderr)
        return 1
    return 0


def _cmd_closed_form(opts: dict) -> int:
    gc = _load_class(opts)
    init = opts["init"] if opts["init"] is not None else list(gc.default_init)
    t0, t1 = opts["t0"], opts["t1"]
    if not 0.0 < t0 < t1:
        raise ValidationError("need 0 < t0 < t1")
    decades = np.log10(t1 / t0)
    n = max(2, int(np.ceil(decades * opts["samples-per-decade"])) + 1)
    times = np.geomspace(t0, t1, n)
    cf = closed_form(gc, init, times - t0)
    if bool(np.all(cf.exact_mask)):
        max_k = [max_abs_sectional(gc, row) for row in cf.values]
    else:
        # slots without a formula carry NaN; no honest curvature then
        max_k = [float("nan")] * times.size
    _emit(opts["out"], _trajectory_csv(gc, times, cf.values, max_k))
    return 0


def _cmd_rescale_limit(opts: dict) -> int:
    gc = _load_class(opts)
    init = opts["init"] if opts["init"] is not None else list(gc.default_init)
    s_list = _require(opts, "s-list")
    if min(s_list) <= 0.0:
        raise ValidationError("rescale factors must be positive")
    lo, hi = config.RESCALE_WINDOW
    t0 = min(1.0, lo * min(s_list))
    t1 = hi * max(s_list)
    traj = integrate(FlowProblem(geometry=gc, init=np.asarray(init, dtype=float), t0=t0, t1=t1))
    spec = soliton_catalog(gc)
    norm = normalizer_for(gc, init, traj)
    rows = []
    covered = True
    for s in s_list:
        if traj.t_final < s * hi * (1.0 - 1e-12):
            covered = False  # early termination: emit what is covered
            break
        rows.append([s, soliton_deviation(traj, s, norm, spec)])
    _emit(opts["out"], _csv_text(["s", "deviation"], rows))
    if not covered or traj.terminated_reason != "completed":
        print(f"flow terminated early: {traj.terminated_reason}", file=sys.stderr)
        return 1
    return 0


def _cmd_fit(opts: dict) -> int:
    path = _require(opts, "in")
    column = _require(opts, "column")
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValidationError(f"{path}: no data rows")
    header = lines[0].split(",")
    if column not in header:
        raise ValidationError(f"{path}: no column {column!r}; have {', '.join(header)}")
    j = header.index(column)
    try:
        table = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed CSV: {exc}") from None
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged CSV")
    ts, ys = table[:, 0], table[:, j]
    if not np.all(np.isfinite(ys)):
        raise ValidationError(f"column {column!r} contains non-finite values")
    fr = fit_power_law(ts, ys, window=opts["window"])
    doc = {
        "input": path,
        "column": column,
        "samples": int(ts.size),
        "window": opts["window"],
        "model": fr.model,
        "exponent": fr.exponent,
        "coefficient": fr.coefficient,
        "log_exponent": fr.log_exponent,
        "residual": fr.residual,
    }
    _emit(opts["out"], _json_text(doc))
    return 0


def _cmd_soliton_check(opts: dict) -> int:
    name = _require(opts, "class")
    params = {p: opts[p] for p in ("k", "c") if opts.get(p) is not None}
    try:
        spec = soliton_catalog(load_catalog(name, **params))
    except CatalogError:
        # not a geometry class: maybe a soliton id given directly
        spec = soliton_catalog(name, **params)
    if opts["t-list"] is not None:
        times = np.asarray(opts["t-list"], dtype=float)
    else:
        times = np.geomspace(1e-2, 1e4, 20)
    checks = [soliton_residual(spec, float(t)) for t in times]
    doc = {
        "soliton": spec.id,
        "weights": spec.weights.tolist(),
        "scale_at_unit_time": spec.scale.tolist(),
        "max_abs_residual": max(r.max_abs_residual for r in checks),
        "max_abs_flow_defect": max(r.max_abs_flow_defect for r in checks),
        "checks": [r.as_dict() for r in checks],
    }
    _emit(opts["out"], _json_text(doc))
    return 0


def _cmd_bundle_flow(opts: dict) -> int:
    from . import bundle  # deferred: pulls in the compiled kernel

    grid = opts["grid"]
    t0 = opts["t0"]
    if opts["holonomy"] is not None:
        rho = np.asarray(opts["holonomy"], dtype=float)
        if opts["fiber-dim"] is not None and opts["fiber-dim"] != rho.shape[0]:
            raise ConfigurationError(
                f"--fiber-dim {opts['fiber-dim']} does not match the holonomy shape {rho.shape}"
            )
        fiber_dim = rho.shape[0]
    else:
        fiber_dim = opts["fiber-dim"] if opts["fiber-dim"] is not None else 2
        rho = np.eye(fiber_dim)
    seed = opts["seed"]
    if seed == "constant":
        state = bundle.constant_state(grid, fiber_dim=fiber_dim, rho=rho, t=t0)
    elif seed == "geodesic":
        state = bundle.geodesic_state(grid, rho=rho, t=t0)
    elif seed == "fourier":
        print(f"fourier seed: rng-seed={opts['rng-seed']}", file=sys.stderr)
        state = bundle.fourier_state(
            grid, rho=rho, fiber_dim=fiber_dim, t=t0, seed=opts["rng-seed"]
        )
    else:
        raise ConfigurationError(
            f"unknown seed {seed!r}; expected constant, geodesic, or fourier"
        )
    traj = bundle.bundle_flow(
        state, opts["t1"], cfl=opts["cfl"], samples_per_decade=opts["samples-per-decade"]
    )
    header = ["t", "energy", "v_tilde", "max_harmonic_residual", "max_einstein_residual", "det_drift"]
    rows = zip(
        traj.times, traj.energies, traj.v_tildes, traj.max_harmonic, traj.max_einstein, traj.det_drifts
    )
    _emit(opts["out"], _csv_text(header, rows))
    if traj.terminated_reason is not None:
        print(f"bundle flow terminated early: {traj.terminated_reason}", file=sys.stderr)
        return 1
    return 0


def _cmd_selftest(opts: dict) -> int:
    from . import acceptance  # deferred: the suite imports everything

    numbers = None
    if opts["only"] is not None:
        numbers = [int(x) for x in opts["only"]]
    results = acceptance.run_all(numbers)
    failed = 0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{r.number:3d}  {mark}  {r.elapsed:8.2f} s  {r.name}")
        if not r.passed:
            failed += 1
            for line in r.details.splitlines():
                print(f"           {line}")
    print(f"passed {len(results) - failed} of {len(results)}")
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


_COMMANDS = (
    ("catalog", _cmd_catalog, "dump the geometry catalog as JSON", _COMMON),
    (
        "curvature",
        _cmd_curvature,
        "curvature report for one left-invariant metric",
        (
            _Opt("class", _c_str, None, "geometry class id"),
            _Opt("coeff", _c_floats, None, "diagonal metric coefficients, comma-separated"),
            *_PARAM_OPTS,
            *_COMMON,
        ),
    ),
    (
        "flow",
        _cmd_flow,
        "integrate the coefficient flow and write a CSV trajectory",
        (
            _Opt("class", _c_str, None, "geometry class id"),
            _Opt("init", _c_floats, None, "initial coefficients (default: class default)"),
            _Opt("t0", _c_float, 1e-3, "start time"),
            _Opt("t1", _c_float, 100.0, "end time"),
            _Opt("rtol", _c_float, config.FLOW_RTOL, "relative tolerance"),
            _Opt("atol", _c_float, config.FLOW_ATOL, "absolute tolerance"),
            _Opt("samples-per-decade", _c_int, config.SAMPLES_PER_DECADE, "output density"),
            _Opt("method", _c_str, "auto", "ODE method (auto|LSODA|RK45|DOP853|Radau)"),
            *_PARAM_OPTS,
            *_COMMON,
        ),
    ),
    (
        "closed-form",
        _cmd_closed_form,
        "evaluate a recorded exact solution on a CSV grid",
        (
            _Opt("class", _c_str, None, "geometry class id"),
            _Opt("init", _c_floats, None, "initial coefficients (default: class default)"),
            _Opt("t0", _c_float, 1e-3, "start time"),
            _Opt("t1", _c_float, 100.0, "end time"),
            _Opt("samples-per-decade", _c_int, config.SAMPLES_PER_DECADE, "output density"),
            *_PARAM_OPTS,
            *_COMMON,
        ),
    ),
    (
        "rescale-limit",
        _cmd_rescale_limit,
        "deviation of the rescaled flow from the catalog soliton",
        (
            _Opt("class", _c_str, None, "geometry class id"),
            _Opt("init", _c_floats, None, "initial coefficients (default: class default)"),
            _Opt("s-list", _c_floats, None, "rescale factors, comma-separated"),
            *_PARAM_OPTS,
            *_COMMON,
        ),
    ),
    (
        "fit",
        _cmd_fit,
        "power-law fit of one CSV column against the first column",
        (
            _Opt("in", _c_str, None, "input CSV path"),
            _Opt("column", _c_str, None, "column name to fit"),
            _Opt("window", _c_float, None, "tail fraction of the log-span (default: last decade)"),
            *_COMMON,
        ),
    ),
    (
        "soliton-check",
        _cmd_soliton_check,
        "pointwise soliton residuals as JSON",
        (
            _Opt("class", _c_str, None, "geometry class or soliton id"),
            _Opt("t-list", _c_floats, None, "times to check (default: 20 log-spaced in [1e-2, 1e4])"),
            *_PARAM_OPTS,
            *_COMMON,
        ),
    ),
    (
        "bundle-flow",
        _cmd_bundle_flow,
        "torus-bundle flow diagnostics as CSV",
        (
            _Opt("grid", _c_int, 64, "number of base grid points"),
            _Opt("fiber-dim", _c_int, None, "fiber dimension (default: from holonomy, else 2)"),
            _Opt("holonomy", _c_matrix, None, 'seam twist, rows ";"-separated: "a,b;c,d"'),
            _Opt("seed", _c_str, "geodesic", "initial field: constant | geodesic | fourier"),
            _Opt("t0", _c_float, config.BUNDLE_T0, "start time"),
            _Opt("t1", _c_float, 10.0, "end time"),
            _Opt("cfl", _c_float, config.BUNDLE_CFL, "parabolic step fraction"),
            _Opt("samples-per-decade", _c_int, config.BUNDLE_SAMPLES_PER_DECADE, "output density"),
            _Opt("rng-seed", _c_int, config.BUNDLE_SEED_RNG, "RNG seed for the fourier field"),
            *_COMMON,
        ),
    ),
    (
        "selftest",
        _cmd_selftest,
        "run the acceptance checks and print a pass/fail table",
        (_Opt("only", _c_floats, None, "criterion numbers to run, comma-separated"),),
    ),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riccilab",
        description="numerical laboratory for long-time homogeneous geometric flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text, opts in _COMMANDS:
        p = sub.add_parser(name, help=help_text, description=help_text)
        for o in opts:
            p.add_argument(f"--{o.name}", default=None, help=o.help)
        p.set_defaults(_run=fn, _opts=opts)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args._run(_resolve(args))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
