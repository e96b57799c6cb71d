"""Acceptance checks behind the `selftest` subcommand.

Each criterion function exercises one headline guarantee of the package
end-to-end and returns (passed, details).  Thresholds that are not forced
by arithmetic were frozen after calibration runs and live in `config`;
comments note the measured slack where it is not obvious.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import config
from .algebra import catalog_ids, jacobi_residual, load_catalog, unimodularity_defect
from .curvature import sectional, tabulated_sectional
from .errors import NumericalError
from .flow import (
    TABULATED_CLASSES,
    FlowProblem,
    Trajectory,
    closed_form,
    integrate,
    rhs_from_ricci,
    tabulated_rhs,
)
from .rescale import (
    NormalizerSpec,
    asymptotics_check,
    compose_normalizers,
    fit_power_law,
    normalizer_for,
    rescaled_trajectory,
    soliton_deviation,
    soliton_normalizer,
)
from .soliton import soliton_catalog, soliton_ids, soliton_residual

__all__ = ["CriterionResult", "run_all", "run_one"]

_THREED_CLASSES = ("sol3", "nil3", "isom_r2", "sl2r")
_HOLONOMY = np.array([[2.0, 1.0], [1.0, 1.0]])


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    elapsed: float
    details: str


class _Clauses:
    """Collects per-clause pass/fail lines; the criterion passes iff all do."""

    def __init__(self) -> None:
        self.ok = True
        self.lines: list[str] = []

    def check(self, cond: bool, text: str) -> None:
        self.ok = bool(cond) and self.ok
        self.lines.append(("pass  " if cond else "FAIL  ") + text)

    def result(self) -> tuple[bool, str]:
        return self.ok, "\n".join(self.lines)


def _random_coeffs(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    # log-uniform over two decades keeps the samples away from 0 and spread
    return np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=(count, n)))


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def _c1() -> tuple[bool, str]:
    """Engine sectional curvatures vs the per-class tabulated formulas."""
    cl = _Clauses()
    rng = np.random.default_rng(config.SEED)
    start = time.perf_counter()
    for cid in _THREED_CLASSES:
        gc = load_catalog(cid)
        worst = 0.0
        for v in _random_coeffs(rng, 100, 3):
            k_engine = sectional(gc.algebra, np.diag(v))
            k_table = tabulated_sectional(cid, v)
            scale = np.maximum(np.abs(k_table), 1e-30)
            worst = max(worst, float(np.max(np.abs(k_engine - k_table) / scale)))
        cl.check(worst <= 1e-12, f"{cid}: 100 metrics, worst rel err {worst:.3e}")
    elapsed = time.perf_counter() - start
    cl.check(elapsed < 1.0, f"runtime {elapsed:.3f} s < 1 s")
    return cl.result()


def _c2() -> tuple[bool, str]:
    """-2 Ric from the engine vs the transcribed coefficient ODEs."""
    cl = _Clauses()
    rng = np.random.default_rng(config.SEED + 1)
    for cid in TABULATED_CLASSES:
        gc = load_catalog(cid)
        worst = 0.0
        for v in _random_coeffs(rng, 100, gc.ncoeff):
            a = rhs_from_ricci(gc, v)
            b = tabulated_rhs(gc, v)
            worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))))
        cl.check(worst <= 1e-12, f"{cid}: worst rel err {worst:.3e}")
    return cl.result()


def _c3() -> tuple[bool, str]:
    """Integrated flow vs recorded exact solutions."""
    cl = _Clauses()
    start = time.perf_counter()
    for cid in ("nil3", "a2", "a6", "a7", "a8"):
        gc = load_catalog(cid)
        init = np.asarray(gc.default_init, dtype=float)
        traj = integrate(FlowProblem(gc, init, t0=1e-3, t1=100.0, rtol=1e-9))
        exact = closed_form(gc, init, traj.times - 1e-3)
        mask = exact.exact_mask
        rel = np.abs(traj.coeffs[:, mask] - exact.values[:, mask]) / np.abs(exact.values[:, mask])
        worst = float(np.max(rel))
        slots = ",".join(str(i) for i in np.nonzero(mask)[0])
        cl.check(worst <= 1e-6, f"{cid}: slots [{slots}] worst rel err {worst:.3e}")
    elapsed = time.perf_counter() - start
    cl.check(elapsed < 2.0, f"runtime {elapsed:.3f} s < 2 s")
    return cl.result()


def _c4() -> tuple[bool, str]:
    """Conserved coefficient products along the long runs."""
    cl = _Clauses()
    for cid, (i, j) in (("sol3", (0, 2)), ("isom_r2", (0, 1))):
        gc = load_catalog(cid)
        init = np.asarray(gc.default_init, dtype=float)
        traj = integrate(
            FlowProblem(gc, init, t0=1.0, t1=1e6, rtol=config.LONG_RTOL, atol=config.LONG_ATOL)
        )
        prod = traj.coeffs[:, i] * traj.coeffs[:, j]
        drift = float(np.max(np.abs(prod / prod[0] - 1.0)))
        cl.check(drift <= 1e-8, f"{cid}: product drift {drift:.3e} over [1, 1e6]")
    return cl.result()


def _log_limit(traj: Trajectory, index: int, exponent: float) -> float:
    """Limit of c(t)/t^p for tails with a 1/ln t correction.

    Some slots converge like L*(1 + a/ln t + ...); the plain value at the
    final time is then biased by a few percent.  Evaluating at T and T/10
    and extrapolating linearly in 1/ln t removes the leading correction.
    """
    T = traj.t_final
    v2 = float(traj.coeff_fn(T)[index]) / T**exponent
    v1 = float(traj.coeff_fn(T / 10.0)[index]) / (T / 10.0) ** exponent
    x2, x1 = 1.0 / np.log(T), 1.0 / np.log(T / 10.0)
    a = (v1 - v2) / (x1 - x2)
    return v2 - a * x2


def _c5() -> tuple[bool, str]:
    """Recorded long-time asymptotics, one timed run per class."""
    cl = _Clauses()

    def report(cid, init=None):
        t0 = time.perf_counter()
        rep = asymptotics_check(load_catalog(cid), init=init)
        el = time.perf_counter() - t0
        cl.check(el < 5.0, f"{cid}: runtime {el:.2f} s < 5 s")
        return rep, {r.index: r for r in rep.records}

    rep, rec = report("sol3")
    cl.check(
        abs(rec[1].tail_coefficient / 4.0 - 1.0) <= 0.01
        and abs(rec[1].fitted_exponent - 1.0) <= 0.01,
        f"sol3: B/t -> {rec[1].tail_coefficient:.4f} (want 4 +-1%), "
        f"exponent {rec[1].fitted_exponent:.4f}",
    )

    rep, rec = report("sl2r")
    cl.check(
        rec[0].tail_coefficient > 0.0 and rec[0].cauchy_rel <= 0.01,
        f"sl2r: A -> {rec[0].tail_coefficient:.4f} with Cauchy gap {rec[0].cauchy_rel:.2e}",
    )
    for i in (1, 2):
        cl.check(
            abs(rec[i].tail_coefficient / 2.0 - 1.0) <= 0.01,
            f"sl2r: slot {i}/t -> {rec[i].tail_coefficient:.4f} (want 2 +-1%)",
        )

    rep, rec = report("isom_r2")
    for r in rep.records:
        err = r.coefficient_rel_err
        cl.check(
            err is not None and err <= 0.005,
            f"isom_r2: slot {r.index} limit {r.tail_coefficient:.5f} "
            f"vs {r.expected_coefficient:.5f} (rel {err:.2e})",
        )

    rep, rec = report("a3")
    cl.check(
        abs(rec[3].tail_coefficient / rec[3].expected_coefficient - 1.0) <= 0.01,
        f"a3: D/t -> {rec[3].tail_coefficient:.4f} (want 12k^2 = "
        f"{rec[3].expected_coefficient:.1f} +-1%)",
    )

    # a5 carries 1/ln t corrections; use the extrapolating estimator
    t0 = time.perf_counter()
    gc = load_catalog("a5")
    traj = integrate(FlowProblem(gc, np.asarray(gc.default_init), t0=1.0, t1=1e6))
    rep = asymptotics_check(gc)
    el = time.perf_counter() - t0
    cl.check(el < 5.0, f"a5: runtime {el:.2f} s < 5 s")
    d_lim = _log_limit(traj, 3, 1.0)
    cl.check(abs(d_lim / 3.0 - 1.0) <= 0.02, f"a5: D/t -> {d_lim:.4f} (want 3 +-2%)")
    combos = {c.name: c for c in rep.combinations}
    spread = combos["A*B tail spread"].measured
    cl.check(spread <= 0.02, f"a5: A*B tail spread {spread:.2e} (want <= 2%)")
    # slope of A/B in ln t, same 1/ln t bias handled by extrapolating in 1/ln T
    def slope(T):
        m = (traj.times >= T / 10.0) & (traj.times <= T)
        return float(np.polyfit(np.log(traj.times[m]), traj.coeffs[m, 0] / traj.coeffs[m, 1], 1)[0])

    x2, x1 = 1.0 / np.log(1e6), 1.0 / np.log(1e5)
    s2, s1 = slope(1e6), slope(1e5)
    s_lim = s2 - (s1 - s2) / (x1 - x2) * x2
    cl.check(
        abs(s_lim / (2.0 / 3.0) - 1.0) <= 0.02,
        f"a5: d(A/B)/d(ln t) -> {s_lim:.4f} (want 2/3 +-2%)",
    )

    rep, rec = report("a7")
    cl.check(
        abs(rec[0].tail_coefficient / 4.0 - 1.0) <= 0.01,
        f"a7: A/t -> {rec[0].tail_coefficient:.4f} (want 4 +-1%)",
    )
    for i in (1, 2):
        cl.check(
            abs(rec[i].fitted_exponent - 1.0 / 3.0) <= 0.02,
            f"a7: slot {i} exponent {rec[i].fitted_exponent:.4f} (want 1/3 +-0.02)",
        )

    # a8 from symmetric data: the recorded limit A -> D0/2 is checked as
    # stated.  dA/dt = (B-C)^2/(BC) vanishes identically for B0 = C0, so A
    # stays at A0; the clause documents the measured value either way.
    rep, rec = report("a8", init=(1.0, 1.0, 1.0, 1.0))
    a_lim = rec[0].tail_coefficient
    cl.check(
        abs(a_lim / 0.5 - 1.0) <= 0.01,
        f"a8: A -> {a_lim:.4f} (recorded limit D0/2 = 0.5 +-1%; "
        f"dA/dt = (B-C)^2/(BC) = 0 for this data, so A stays at A0)",
    )
    return cl.result()


def _c6() -> tuple[bool, str]:
    """Soliton residuals Ric + (1/2) L_V g + g/2t across the catalog."""
    cl = _Clauses()
    times = np.geomspace(1e-2, 1e4, 20)
    for sid in soliton_ids():
        spec = soliton_catalog(sid)
        worst = max(soliton_residual(spec, float(t)).max_abs_residual for t in times)
        cl.check(worst <= 1e-12, f"{sid}: max residual {worst:.3e} at 20 times")
    return cl.result()


def _c7() -> tuple[bool, str]:
    """Rescaled flows approach the catalog solitons monotonically."""
    cl = _Clauses()
    s_list = (1e3, 1e4, 1e5, 1e6)
    lo, hi = config.RESCALE_WINDOW
    for cid in catalog_ids():
        gc = load_catalog(cid)
        if gc.soliton_id is None:
            continue
        init = np.asarray(gc.default_init, dtype=float)
        traj = integrate(FlowProblem(gc, init, t0=min(1.0, lo * s_list[0]), t1=hi * s_list[-1]))
        if traj.terminated_reason != "completed":
            cl.check(False, f"{cid}: flow terminated early ({traj.terminated_reason})")
            continue
        spec = soliton_catalog(gc)
        norm = normalizer_for(gc, init, traj)
        devs = [soliton_deviation(traj, s, norm, spec) for s in s_list]
        monotone = all(
            d2 < d1 or d2 <= config.RESCALE_NOISE_FLOOR for d1, d2 in zip(devs, devs[1:])
        )
        final_ok = devs[-1] <= config.SOLITON_DEVIATION_MAX
        cl.check(
            monotone and final_ok,
            f"{cid}: deviations " + " > ".join(f"{d:.2e}" for d in devs),
        )
    return cl.result()


def _c8() -> tuple[bool, str]:
    """t * max|K| stays bounded; the nil tail reaches its closed-form value."""
    cl = _Clauses()
    for cid in catalog_ids():
        if cid == "a10":
            continue  # compact block: finite-time termination, excluded
        gc = load_catalog(cid)
        traj = integrate(FlowProblem(gc, np.asarray(gc.default_init), t0=1.0, t1=1e6))
        if traj.terminated_reason != "completed":
            cl.check(False, f"{cid}: flow terminated early ({traj.terminated_reason})")
            continue
        monitor = traj.t_max_k
        i0 = int(np.searchsorted(traj.times, 1e3))
        late = monitor[i0:]
        # The absolute floor absorbs t * (roundoff in max|K|): flows that
        # converge to flat metrics leave ~1e-16 of cancellation noise in the
        # curvature, which t = 1e6 amplifies to ~1e-10 of spurious "growth".
        bounded = bool(np.all(np.isfinite(monitor))) and float(np.max(late)) <= 2.0 * float(
            monitor[i0]
        ) + 1e-8
        cl.check(
            bounded,
            f"{cid}: sup t*max|K| = {float(np.max(monitor)):.4f}, "
            f"late/ref = {float(np.max(late)):.4f}/{float(monitor[i0]):.4f}",
        )
    nil = integrate(FlowProblem(load_catalog("nil3"), np.ones(3), t0=1.0, t1=1e6))
    tail = float(nil.t_max_k[-1])
    cl.check(abs(tail / 0.25 - 1.0) <= 0.05, f"nil3: tail t*max|K| = {tail:.5f} (want 1/4 +-5%)")
    return cl.result()


def _c9() -> tuple[bool, str]:
    """Bundle flow: residual convergence, monotonicity, and normalizations."""
    from . import bundle

    cl = _Clauses()

    # (a) geodesic data: harmonic residual at scheme order under refinement
    res = []
    for m in (16, 32, 64, 128):
        st = bundle.geodesic_state(m, rho=_HOLONOMY, t=1.0)
        res.append(float(bundle.harmonic_residual_norm(st).max()))
    orders = [float(np.log2(a / b)) for a, b in zip(res, res[1:])]
    cl.check(
        min(orders) >= 3.5,
        "geodesic harmonic residual orders " + ", ".join(f"{p:.2f}" for p in orders),
    )
    # (a) einstein residual vanishes for the analytic soliton base
    st = bundle.geodesic_state(256, rho=_HOLONOMY, t=1.0)
    x = bundle.geodesic_generator(_HOLONOMY)
    g_exact = 1.0 * float(np.trace(x @ x)) / (8.0 * np.pi**2)
    st = bundle.BundleState(np.full(256, g_exact), st.G, _HOLONOMY, 1.0)
    eres = float(np.abs(bundle.einstein_residual(st)).max())
    cl.check(eres <= 1e-7, f"analytic soliton base: einstein residual {eres:.3e}")

    # (b) v_tilde never increases on a generic run, constant on soliton data
    generic = bundle.bundle_flow(bundle.fourier_state(64, rho=_HOLONOMY, t=1.0), 10.0)
    cl.check(
        generic.v_tilde_increase_max <= 1e-10,
        f"generic run: worst per-step v_tilde increase {generic.v_tilde_increase_max:.3e}",
    )
    sol = bundle.bundle_flow(bundle.geodesic_state(64, rho=_HOLONOMY, t=1.0), 100.0)
    vdev = float(np.max(np.abs(sol.v_tildes - sol.v_tildes[0]))) / 2.0
    cl.check(vdev <= 1e-8, f"soliton run: v_tilde drift {vdev:.3e} per decade")

    # (c) the pinned hyperbolic-holonomy run
    start = time.perf_counter()
    traj = bundle.bundle_flow(bundle.fourier_state(256, rho=_HOLONOMY, t=1.0), 1e3)
    elapsed = time.perf_counter() - start
    final = traj.final_state
    harm = float(bundle.harmonic_residual_norm(final).max())
    eins = float(np.abs(bundle.einstein_residual(final)).max())
    cl.check(
        traj.terminated_reason is None and harm <= 1e-4 and eins <= 1e-4,
        f"M=256 run to t=1e3: harmonic {harm:.3e}, einstein {eins:.3e}",
    )
    cl.check(elapsed < 60.0, f"M=256 runtime {elapsed:.1f} s < 60 s")

    # (d) trace identity from analytic samplers (exact derivatives)
    worst = 0.0
    alpha = np.linspace(0.0, 2.0 * np.pi, 17)
    for gen in (bundle.geodesic_generator(_HOLONOMY), np.array([[0.7, 0.3], [0.3, -0.7]])):
        samp = bundle.geodesic_samplers(gen, t=1.0)
        cur = bundle.bundle_curvature(samp, alpha)
        worst = max(worst, float(np.max(np.abs(cur.trace_identity_residual))))
    cl.check(worst <= 1e-10, f"trace identity residual {worst:.3e} at det == 1")

    # (e) identity-map normalization against the coordinate oracle
    chk = bundle.identity_map_check()
    cl.check(
        chk["max_residual"] <= 1e-8,
        f"identity map: a = {chk['a']:.6f}, residual {chk['max_residual']:.3e}",
    )
    return cl.result()


def _c10() -> tuple[bool, str]:
    """Structural properties: algebra checks, group action, fits, determinism."""
    from . import bundle, cli

    cl = _Clauses()

    worst_j = worst_u = 0.0
    for cid in catalog_ids():
        gc = load_catalog(cid)
        if gc.is_lie:
            worst_j = max(worst_j, float(np.max(np.abs(jacobi_residual(gc.algebra)))))
            worst_u = max(worst_u, float(np.max(np.abs(unimodularity_defect(gc.algebra)))))
    cl.check(worst_j == 0.0 and worst_u == 0.0, "catalog Jacobi and unimodularity exactly zero")

    # rescaling group action: s1 then s2 equals s1*s2 with composed normalizers
    gc = load_catalog("nil3")
    traj = integrate(FlowProblem(gc, np.ones(3), t0=1.0, t1=2100.0))
    spec = soliton_catalog(gc)
    norm_u = soliton_normalizer(spec)
    norm_k = NormalizerSpec(norm_u.exponents, np.array([0.7, 1.3, 2.1]))
    step1 = rescaled_trajectory(traj, 10.0, norm_u, window=(99.0, 201.0))
    twice = rescaled_trajectory(step1, 100.0, norm_k, window=(1.0, 2.0))
    once = rescaled_trajectory(traj, 1000.0, compose_normalizers(norm_u, norm_k), window=(1.0, 2.0))
    gap = float(np.max(np.abs(twice.coeffs / once.coeffs - 1.0)))
    cl.check(gap <= 1e-10, f"group action gap {gap:.3e}")

    # fit recovery on an exact power law, on two different grids
    worst = 0.0
    for ts in (np.geomspace(1e2, 1e4, 80), np.linspace(1e2, 1e4, 80)):
        fr = fit_power_law(ts, 5.0 * ts**2)
        worst = max(worst, abs(fr.exponent - 2.0), abs(fr.coefficient - 5.0))
    cl.check(worst <= 1e-10, f"power-law recovery err {worst:.3e}")

    # SL(N) invariance of the symmetric-space metric
    rng = np.random.default_rng(config.SEED + 2)
    worst = 0.0
    for n in (2, 3):
        for _ in range(20):
            l = np.tril(rng.uniform(-1.0, 1.0, (n, n))) + np.eye(n) * 2.0
            g = l @ l.T
            g /= np.linalg.det(g) ** (1.0 / n)
            k = rng.uniform(-1.0, 1.0, (n, n))
            k = k + k.T
            a = np.eye(n) + 0.3 * rng.uniform(-1.0, 1.0, (n, n))
            d = np.linalg.det(a)
            if d < 0.0:
                a[0] *= -1.0
                d = -d
            a /= d ** (1.0 / n)
            v0 = bundle.sym_space_metric(g, k)
            v1 = bundle.sym_space_metric(a @ g @ a.T, a @ k @ a.T)
            worst = max(worst, abs(v1 - v0) / max(1.0, abs(v0)))
    cl.check(worst <= 1e-12, f"SL(N) invariance gap {worst:.3e}")

    # byte-identical reruns of the CLI
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        pairs = []
        for name, argv in (
            ("flow", ["flow", "--class", "nil3", "--init", "1,1,1", "--t0", "0.001", "--t1", "10"]),
            (
                "bundle",
                ["bundle-flow", "--grid", "16", "--holonomy", "2,1;1,1", "--seed", "fourier",
                 "--t0", "1", "--t1", "1.2"],
            ),
        ):
            paths = [str(Path(tmp) / f"{name}{i}.csv") for i in (0, 1)]
            for p in paths:
                code = cli.main(argv + ["--out", p])
                if code != 0:
                    raise NumericalError(f"selftest CLI run failed with exit {code}")
            pairs.append(Path(paths[0]).read_bytes() == Path(paths[1]).read_bytes())
        cl.check(all(pairs), "CLI reruns byte-identical (flow, bundle-flow)")
    return cl.result()


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

_CRITERIA: tuple[tuple[int, str, Callable[[], tuple[bool, str]]], ...] = (
    (1, "curvature tables", _c1),
    (2, "flow right-hand sides", _c2),
    (3, "closed forms", _c3),
    (4, "conserved products", _c4),
    (5, "long-time asymptotics", _c5),
    (6, "soliton residuals", _c6),
    (7, "rescaled convergence", _c7),
    (8, "type-III bound", _c8),
    (9, "bundle flow", _c9),
    (10, "property suites", _c10),
)


def run_one(number: int) -> CriterionResult:
    for num, name, fn in _CRITERIA:
        if num == number:
            start = time.perf_counter()
            try:
                passed, details = fn()
            except Exception as exc:  # a crash is a failure, not an abort
                passed, details = False, f"raised {type(exc).__name__}: {exc}"
            return CriterionResult(num, name, passed, time.perf_counter() - start, details)
    raise ValueError(f"no acceptance criterion number {number}")


def run_all(numbers: Optional[list] = None) -> list[CriterionResult]:
    if numbers is None:
        numbers = [num for num, _, _ in _CRITERIA]
    return [run_one(int(n)) for n in numbers]
