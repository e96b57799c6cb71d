"""Parabolic rescaling, per-class normalizers, and long-time asymptotics.

The rescaled flow is g_s(t) = s^-1 g(st).  On diagonal coefficient vectors
the comparison maps act slot by slot, so the whole apparatus reduces to

    c_hat_i(s, t) = kappa_i * s**(p_i) * s**-1 * c_i(s t),

with per-class exponents p_i and data-dependent constants kappa_i.  Both are
derived here from the catalog rather than stored by hand: a class that
contracts onto a soliton with weights w_i must have p_i = 2 w_i, and kappa_i
is the ratio of the soliton's t=1 slice to the class's asymptotic coefficient
(extrapolated from the trajectory when no closed expression exists).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import config
from .algebra import GeometryClass, load_catalog
from .curvature import max_abs_sectional
from .errors import NumericalError, UnsupportedClassError, ValidationError
from .flow import FlowProblem, Trajectory, integrate, rhs
from .soliton import SolitonSpec, soliton_catalog

__all__ = [
    "NormalizerSpec",
    "FitResult",
    "AsymptoticRecord",
    "CombinationRecord",
    "AsymptoticsReport",
    "identity_normalizer",
    "soliton_normalizer",
    "compose_normalizers",
    "limit_extrapolate",
    "normalizer_for",
    "rescaled_trajectory",
    "soliton_trajectory",
    "soliton_deviation",
    "fit_power_law",
    "asymptotics_check",
]


@dataclass(frozen=True)
class NormalizerSpec:
    """Per-coefficient rescaling data: c_hat_i(s,t) = constants_i * s**(exponents_i - 1) * c_i(st)."""

    exponents: np.ndarray
    constants: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.exponents, dtype=float)
        k = np.asarray(self.constants, dtype=float)
        if p.shape != k.shape or p.ndim != 1:
            raise ValidationError("exponents and constants must be vectors of equal length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(k))):
            raise ValidationError("normalizer entries must be finite")
        if np.min(k) <= 0.0:
            raise ValidationError("normalizer constants must be positive")
        object.__setattr__(self, "exponents", p)
        object.__setattr__(self, "constants", k)

    def scale_factors(self, s: float) -> np.ndarray:
        return self.constants * float(s) ** (self.exponents - 1.0)


def identity_normalizer(n: int) -> NormalizerSpec:
    """The plain parabolic rescaling s**-1 g(st) (exponents 1, constants 1)."""
    return NormalizerSpec(np.ones(n), np.ones(n))


def soliton_normalizer(spec: SolitonSpec) -> NormalizerSpec:
    """The normalizer fixing the soliton: exponents 2w, unit constants."""
    return NormalizerSpec(2.0 * spec.weights, np.ones(spec.nslots))


def compose_normalizers(a: NormalizerSpec, b: NormalizerSpec) -> NormalizerSpec:
    """Normalizer of the composite rescaling (s1 with a, then s2 with b).

    Requires equal exponents; then rescaling by s1 and s2 in either order
    equals a single rescaling by s1*s2 with multiplied constants.
    """
    if not np.array_equal(a.exponents, b.exponents):
        raise ValidationError("only normalizers with equal exponents compose")
    return NormalizerSpec(a.exponents.copy(), a.constants * b.constants)


def limit_extrapolate(traj: Trajectory, index: int) -> float:
    """Limit of a converging coefficient, extrapolated from the final sample.

    For tails c(t) = c* + a/t + O(t^-2) the combination c(T) + T c'(T)
    cancels the leading correction; c' comes from the flow right-hand side.
    """
    t_end = traj.times[-1]
    y = traj.coeffs[-1]
    dy = rhs(traj.geometry, y)[index]
    return float(y[index] + t_end * dy)


def normalizer_for(
    gc: GeometryClass, init, traj: Optional[Trajectory] = None
) -> NormalizerSpec:
    """Derive the class normalizer from its soliton link and asymptote table."""
    spec = soliton_catalog(gc)
    if gc.asymptotics is None:
        raise UnsupportedClassError(f"class {gc.id!r} has no asymptote table to normalize with")
    init = np.asarray(init, dtype=float)
    exponents = 2.0 * spec.weights
    constants = np.full(gc.ncoeff, np.nan)
    for asym in gc.asymptotics:
        i = asym.index
        if abs(asym.exponent - (1.0 - 2.0 * spec.weights[i])) > 1e-12:
            raise NumericalError(
                f"class {gc.id!r} slot {i}: asymptote exponent {asym.exponent} does not"
                f" match the soliton weight {spec.weights[i]}"
            )
        coef = asym.predicted(init, gc.params)
        if coef is None:
            if traj is None:
                raise ValidationError(
                    f"class {gc.id!r} slot {i} has a data-dependent limit;"
                    " pass a trajectory to extrapolate it"
                )
            coef = limit_extrapolate(traj, i)
        if not np.isfinite(coef) or coef <= 0.0:
            raise NumericalError(f"class {gc.id!r} slot {i}: bad asymptotic coefficient {coef}")
        constants[i] = spec.scale[i] / coef
    if np.any(np.isnan(constants)):
        missing = [int(i) for i in np.nonzero(np.isnan(constants))[0]]
        raise UnsupportedClassError(f"class {gc.id!r} lacks asymptote data for slots {missing}")
    return NormalizerSpec(exponents, constants)


def rescaled_trajectory(
    traj: Trajectory,
    s: float,
    norm: NormalizerSpec,
    window: tuple[float, float] = config.RESCALE_WINDOW,
    npts: int = config.RESCALE_POINTS,
) -> Trajectory:
    """The normalized rescaled flow on the requested window, via dense output."""
    if s <= 0.0:
        raise ValidationError("rescale factor must be positive")
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 < lo < hi:
        raise ValidationError("bad rescale window")
    if traj.t_final < s * hi * (1.0 - 1e-12) or traj.times[0] > s * lo:
        raise ValidationError(
            f"trajectory span [{traj.times[0]}, {traj.t_final}] does not cover"
            f" the rescaled window [{s * lo}, {s * hi}]"
        )
    factors = norm.scale_factors(s)
    times = np.linspace(lo, hi, npts)
    coeffs = np.array([factors * traj.coeff_fn(s * t) for t in times])
    # diagnostic curvature of the normalized metrics, same structure constants
    max_k = np.array([max_abs_sectional(traj.geometry, v) for v in coeffs])

    def dense(t: float) -> np.ndarray:
        return factors * traj.coeff_fn(s * t)

    return Trajectory(
        geometry=traj.geometry,
        times=times,
        coeffs=coeffs,
        max_k=max_k,
        terminated_reason=traj.terminated_reason,
        kind="rescaled",
        dense=dense,
    )


def soliton_trajectory(
    spec: SolitonSpec,
    t0: float = 1.0,
    t1: float = 100.0,
    npts: int = 65,
) -> Trajectory:
    """The exact self-similar solution, packaged as a sampled trajectory."""
    gc = load_catalog(spec.id, **spec.params)
    times = np.geomspace(t0, t1, npts)
    coeffs = np.array([spec.coeffs(t) for t in times])
    max_k = np.array([max_abs_sectional(gc, v) for v in coeffs])
    return Trajectory(
        geometry=gc,
        times=times,
        coeffs=coeffs,
        max_k=max_k,
        kind="soliton",
        dense=lambda t: spec.coeffs(t),
    )


def soliton_deviation(
    traj: Trajectory,
    s: float,
    norm: NormalizerSpec,
    spec: Optional[SolitonSpec] = None,
    window: tuple[float, float] = config.RESCALE_WINDOW,
    npts: int = config.RESCALE_POINTS,
) -> float:
    """Sup over the window of the relative gap to the soliton coefficients."""
    if spec is None:
        spec = soliton_catalog(traj.geometry)
    hat = rescaled_trajectory(traj, s, norm, window, npts)
    worst = 0.0
    for t, v in zip(hat.times, hat.coeffs):
        target = spec.coeffs(t)
        worst = max(worst, float(np.max(np.abs(v - target) / target)))
    return worst


# ---------------------------------------------------------------------------
# power-law fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    exponent: float
    coefficient: float
    residual: float
    model: str  # "pure-power" | "log-corrected"
    log_exponent: float = 0.0

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = self.coefficient * t**self.exponent
        if self.log_exponent != 0.0:
            out = out * np.log(t) ** self.log_exponent
        return out


def _tail_mask(ts: np.ndarray, window: Optional[float]) -> np.ndarray:
    lo, hi = ts[0], ts[-1]
    if window is None:
        # default: the last decade (or everything, for short spans)
        start = max(lo, hi / 10.0)
    else:
        if not 0.0 < window <= 1.0:
            raise ValidationError("window must be a tail fraction in (0, 1]")
        span = np.log(hi / lo)
        start = hi * np.exp(-window * span) if span > 0 else lo
    return ts >= start * (1.0 - 1e-12)


def fit_power_law(ts, values, window: Optional[float] = None) -> FitResult:
    """Least-squares power law c*t**p on the tail, with optional (ln t)**q factor.

    ``window`` is the tail fraction of the log-time span to fit on (default:
    the last decade).  The log-corrected models use the fixed exponents
    q in {-1/2, +1/2} and win only when their residual is strictly smaller.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.ndim != 1 or ts.shape != values.shape:
        raise ValidationError("need matching 1-d time and value arrays")
    if np.any(values <= 0.0):
        raise ValidationError("power-law fits need positive values")
    mask = _tail_mask(ts, window)
    if int(mask.sum()) < 16:
        raise ValidationError(f"need at least 16 samples in the fit window, got {int(mask.sum())}")
    t, y = ts[mask], values[mask]
    lt, ly = np.log(t), np.log(y)

    def fit_fixed_q(q: float) -> Optional[FitResult]:
        if q != 0.0 and np.min(t) <= 1.0:
            return None  # ln t must be positive for a (ln t)**q factor
        target = ly - q * np.log(lt) if q != 0.0 else ly
        p, lnc = np.polyfit(lt, target, 1)
        fitted = lnc + p * lt + (q * np.log(lt) if q != 0.0 else 0.0)
        residual = float(np.max(np.abs(np.expm1(fitted - ly))))
        model = "pure-power" if q == 0.0 else "log-corrected"
        return FitResult(float(p), float(np.exp(lnc)), residual, model, q)

    candidates = [r for q in config.LOG_CORRECTION_EXPONENTS for r in [fit_fixed_q(q)] if r]
    # prefer the pure power law unless a log correction is strictly better
    candidates.sort(key=lambda r: (r.residual, abs(r.log_exponent)))
    return candidates[0]


# ---------------------------------------------------------------------------
# asymptotics verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticRecord:
    """One coefficient's long-time behaviour against its recorded asymptote."""

    index: int
    expected_exponent: float
    expected_coefficient: Optional[float]
    fitted_exponent: float
    fitted_coefficient: float
    tail_coefficient: float  # c(T) / T**expected_exponent
    cauchy_rel: float  # |c(T) - c(T/10)| / c(T)

    @property
    def coefficient_rel_err(self) -> Optional[float]:
        if self.expected_coefficient is None:
            return None
        return abs(self.tail_coefficient / self.expected_coefficient - 1.0)


@dataclass(frozen=True)
class CombinationRecord:
    """A scale-free combination check (used where constants are data-dependent)."""

    name: str
    measured: float
    expected: Optional[float]

    @property
    def rel_err(self) -> Optional[float]:
        if self.expected is None or self.expected == 0.0:
            return None
        return abs(self.measured / self.expected - 1.0)


@dataclass(frozen=True)
class AsymptoticsReport:
    class_id: str
    t_max: float
    records: tuple[AsymptoticRecord, ...]
    combinations: tuple[CombinationRecord, ...]


def _value_at(traj: Trajectory, t: float, index: int) -> float:
    return float(traj.coeff_fn(t)[index])


def asymptotics_check(
    gc: GeometryClass,
    init=None,
    t_max: float = 1e6,
    rtol: float = config.FLOW_RTOL,
    atol: float = config.FLOW_ATOL,
) -> AsymptoticsReport:
    """Integrate to t_max and compare tails with the class's recorded asymptotics."""
    if gc.asymptotics is None:
        raise UnsupportedClassError(f"class {gc.id!r} has no recorded asymptotics")
    if init is None:
        init = gc.default_init
    init = np.asarray(init, dtype=float)
    traj = integrate(FlowProblem(gc, init, t0=1.0, t1=t_max, rtol=rtol, atol=atol))
    if traj.terminated_reason != "completed":
        raise NumericalError(
            f"class {gc.id!r} terminated early ({traj.terminated_reason}) at t="
            f"{traj.t_final}"
        )
    records = []
    for asym in gc.asymptotics:
        i = asym.index
        fit = fit_power_law(traj.times, traj.coeffs[:, i])
        c_end = _value_at(traj, t_max, i)
        c_mid = _value_at(traj, t_max / 10.0, i)
        records.append(
            AsymptoticRecord(
                index=i,
                expected_exponent=asym.exponent,
                expected_coefficient=asym.predicted(init, gc.params),
                fitted_exponent=fit.exponent,
                fitted_coefficient=fit.coefficient,
                tail_coefficient=c_end / t_max**asym.exponent,
                cauchy_rel=abs(c_end - c_mid) / abs(c_end),
            )
        )
    combos: list[CombinationRecord] = []
    if gc.id == "a5":
        combos = _a5_combinations(traj)
    return AsymptoticsReport(gc.id, float(t_max), tuple(records), tuple(combos))


def _a5_combinations(traj: Trajectory) -> list[CombinationRecord]:
    """Scale-free checks for the class whose constants carry an unknown factor.

    A ~ 2*lam*(ln t)**(1/2) and B ~ 3*lam*(ln t)**(-1/2) with lam data
    dependent, so only lam-free combinations are testable: the product A*B
    levels off (to 6*lam**2), and A/B grows like (2/3) ln t.
    """
    mask = _tail_mask(traj.times, None)
    t = traj.times[mask]
    a = traj.coeffs[mask, 0]
    b = traj.coeffs[mask, 1]
    ab = a * b
    ab_spread = float((np.max(ab) - np.min(ab)) / np.mean(ab))
    slope = float(np.polyfit(np.log(t), a / b, 1)[0])
    return [
        CombinationRecord("A*B tail spread", ab_spread, 0.0),
        CombinationRecord("d(A/B)/d(ln t)", slope, 2.0 / 3.0),
    ]
