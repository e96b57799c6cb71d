"""Homogeneous Ricci flow of diagonal left-invariant metrics.

The flow d/dt g = -2 Ric preserves diagonality for every catalog class, so the
state is just the vector of diagonal coefficients.  Two independent routes to
the right-hand side coexist on purpose and are cross-checked in the tests:

* ``rhs_from_ricci`` -- generic, straight from the curvature engine;
* ``tabulated_rhs``  -- hand-transcribed rational systems for the classes
                        whose equations are written out below.

``rhs`` dispatches to the tabulated system when one exists.  ``integrate``
drives an adaptive embedded RK 5(4) pair (PI step control, dense output) with
a terminal event that ends the run when a coefficient collapses, and
``closed_form`` evaluates the exact solutions that exist for some classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import config
from .algebra import GeometryClass
from .curvature import max_abs_sectional, ricci
from .errors import NumericalError, UnsupportedClassError, ValidationError

__all__ = [
    "FlowProblem",
    "Trajectory",
    "ClosedForm",
    "rhs",
    "rhs_from_ricci",
    "tabulated_rhs",
    "integrate",
    "closed_form",
    "type_iii_sup",
    "TABULATED_CLASSES",
]

TABULATED_CLASSES = ("sol3", "nil3", "isom_r2", "sl2r", "a2", "a6")


def rhs_from_ricci(gc: GeometryClass, coeffs) -> np.ndarray:
    """-2 Ric of diag(coeffs), computed by the curvature engine."""
    v = np.asarray(coeffs, dtype=float)
    if np.min(v) <= 0.0:
        raise ValidationError("metric coefficients must be positive")
    if gc.is_lie:
        return -2.0 * np.diagonal(ricci(gc.algebra, np.diag(v))).copy()
    # analytic classes: per-slot Ricci eigenvalue of the reference metric,
    # independent of the coefficients (Ricci is scale-invariant)
    return -2.0 * np.asarray(gc.analytic_ric, dtype=float)


def tabulated_rhs(gc: GeometryClass, coeffs) -> np.ndarray:
    """Hand-transcribed flow systems for the classes with explicit equations."""
    cid = gc.id
    if cid == "sol3":
        a, b, c = coeffs
        return np.array(
            [(c * c - a * a) / (b * c), (a + c) ** 2 / (a * c), (a * a - c * c) / (a * b)]
        )
    if cid == "nil3":
        a, b, c = coeffs
        return np.array([-a * a / (b * c), a / c, a / b])
    if cid == "isom_r2":
        a, b, c = coeffs
        return np.array(
            [-(a * a - b * b) / (b * c), -(b * b - a * a) / (a * c), (a - b) ** 2 / (a * b)]
        )
    if cid == "sl2r":
        a, b, c = coeffs
        return np.array(
            [
                ((b - c) ** 2 - a * a) / (b * c),
                ((c + a) ** 2 - b * b) / (a * c),
                ((a + b) ** 2 - c * c) / (a * b),
            ]
        )
    if cid == "a2":
        k = gc.params["k"]
        out = np.zeros(4)
        out[3] = 4.0 * (k * k + k + 1.0)
        return out
    if cid == "a6":
        a, b, c, d = coeffs
        return np.array([b / d, c / d - b * b / (a * d), -c * c / (b * d), b / a + c / b])
    raise UnsupportedClassError(f"no tabulated flow system for class {cid!r}")


def rhs(gc: GeometryClass, coeffs) -> np.ndarray:
    """Coefficient derivatives at the given diagonal metric."""
    v = np.asarray(coeffs, dtype=float)
    if np.min(v) <= 0.0:
        raise ValidationError("metric coefficients must be positive")
    if gc.id in TABULATED_CLASSES:
        return tabulated_rhs(gc, v)
    return rhs_from_ricci(gc, v)


_METHODS = ("auto", "LSODA", "RK45", "DOP853", "Radau")


@dataclass(frozen=True)
class FlowProblem:
    geometry: GeometryClass
    init: np.ndarray
    t0: float = 1e-3
    t1: float = 100.0
    rtol: float = config.FLOW_RTOL
    atol: float = config.FLOW_ATOL
    samples_per_decade: int = config.SAMPLES_PER_DECADE
    # "auto" = LSODA.  Classes with rotational couplings (the plane-isometry
    # one, a3, asymmetric a8 data, ...) relax onto their diagonal lock at an
    # O(1) rate while t runs to 1e6, so a purely explicit method ends up
    # stability-limited for ~1e6 steps; LSODA switches itself to BDF there
    # and behaves like an Adams method on the genuinely nonstiff classes.
    method: str = "auto"

    def __post_init__(self) -> None:
        v = np.asarray(self.init, dtype=float)
        if v.shape != (self.geometry.ncoeff,):
            raise ValidationError(
                f"class {self.geometry.id!r} needs {self.geometry.ncoeff} coefficients,"
                f" got shape {v.shape}"
            )
        if np.min(v) <= 0.0:
            raise ValidationError("metric coefficients must be positive")
        if not 0.0 < self.t0 < self.t1:
            raise ValidationError("need 0 < t0 < t1")
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValidationError("tolerances must be positive")
        if self.samples_per_decade < 1:
            raise ValidationError("samples_per_decade must be at least 1")
        if self.method not in _METHODS:
            raise ValidationError(f"method must be one of {_METHODS}")
        object.__setattr__(self, "init", v)


@dataclass(frozen=True)
class Trajectory:
    """Sampled flow: coeffs[i] and max_k[i] belong to times[i]."""

    geometry: GeometryClass
    times: np.ndarray
    coeffs: np.ndarray
    max_k: np.ndarray
    terminated_reason: str = "completed"
    kind: str = "flow"
    dense: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def t_max_k(self) -> np.ndarray:
        """The type-III monitor t * max|K| at the sample times."""
        return self.times * self.max_k

    def coeff_fn(self, t: float) -> np.ndarray:
        """Coefficients at an arbitrary time inside the integrated span."""
        if self.dense is None:
            raise NumericalError("trajectory carries no dense output")
        lo, hi = self.times[0], self.times[-1]
        if not lo <= t <= hi * (1.0 + 1e-12):
            raise ValidationError(f"t={t} outside integrated span [{lo}, {hi}]")
        return np.asarray(self.dense(min(t, hi)), dtype=float)


def _sample_times(t0: float, t1: float, per_decade: int) -> np.ndarray:
    decades = np.log10(t1 / t0)
    n = max(2, int(np.ceil(decades * per_decade)) + 1)
    return np.geomspace(t0, t1, n)


def integrate(problem: FlowProblem, times: Sequence[float] | None = None) -> Trajectory:
    """Integrate the flow over [t0, t1] (or until a coefficient collapses)."""
    gc = problem.geometry
    floor = config.POSITIVITY_FLOOR

    def f(_t: float, y: np.ndarray) -> np.ndarray:
        # Clip so stage evaluations that overshoot past a collapsing
        # coefficient stay evaluable; the terminal event ends the run there.
        # Overflow in a genuinely singular stage is handled by the solver
        # rejecting the step (and eventually giving up -> "blow-up").
        with np.errstate(all="ignore"):
            return rhs(gc, np.maximum(y, floor))

    def hit_floor(_t: float, y: np.ndarray) -> float:
        return float(np.min(y) - floor)

    hit_floor.terminal = True
    hit_floor.direction = -1

    if times is not None:
        t_eval = np.asarray(times, dtype=float)
    else:
        t_eval = _sample_times(problem.t0, problem.t1, problem.samples_per_decade)
    method = "LSODA" if problem.method == "auto" else problem.method
    with np.errstate(all="ignore"):
        sol = solve_ivp(
            f,
            (problem.t0, problem.t1),
            problem.init,
            method=method,
            t_eval=t_eval,
            rtol=problem.rtol,
            atol=problem.atol,
            events=hit_floor,
            dense_output=True,
        )
    if sol.status == -1:
        reason = "blow-up"
    elif sol.status == 1:
        reason = "degenerate"
    else:
        reason = "completed"
    ts, ys = sol.t, sol.y.T
    if reason == "degenerate" and sol.t_events[0].size:
        ts = np.append(ts, sol.t_events[0][0])
        ys = np.vstack([ys, sol.y_events[0][0]]) if ys.size else sol.y_events[0][:1]
    if ts.size == 0:
        raise NumericalError(f"integration failed for class {gc.id!r}: {sol.message}")
    with np.errstate(all="ignore"):
        max_k = np.array([max_abs_sectional(gc, np.maximum(y, floor)) for y in ys])
    return Trajectory(
        geometry=gc,
        times=ts,
        coeffs=ys,
        max_k=max_k,
        terminated_reason=reason,
        dense=(lambda t: sol.sol(t)),
    )


# ---------------------------------------------------------------------------
# closed-form solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedForm:
    """Exact coefficients at elapsed time t; slots without a formula carry NaN."""

    values: np.ndarray
    exact_mask: np.ndarray


def closed_form(gc: GeometryClass, init, t) -> ClosedForm:
    """Exact solution, t measured from the initial condition (values(0) == init).

    Accepts a scalar or an array of elapsed times; values get a leading time
    axis in the array case.
    """
    v0 = np.asarray(init, dtype=float)
    if np.min(v0) <= 0.0:
        raise ValidationError("metric coefficients must be positive")
    t_in = np.asarray(t, dtype=float)
    scalar = t_in.ndim == 0
    t = np.atleast_1d(t_in)[:, None]  # column, broadcasts against slots
    if np.min(t) < 0.0:
        raise ValidationError("elapsed time must be nonnegative")
    cid = gc.id
    if cid == "nil3":
        a0, b0, c0 = v0
        u = 1.0 + 3.0 * a0 * t / (b0 * c0)
        vals = np.concatenate(
            [a0 * u ** (-1.0 / 3.0), b0 * u ** (1.0 / 3.0), c0 * u ** (1.0 / 3.0)], axis=1
        )
        mask = np.ones(3, dtype=bool)
    elif cid == "a2":
        k = gc.params["k"]
        vals = np.tile(v0, (t.shape[0], 1))
        vals[:, 3] = v0[3] + 4.0 * (k * k + k + 1.0) * t[:, 0]
        mask = np.ones(4, dtype=bool)
    elif cid == "a6":
        a0, b0, c0, d0 = v0
        u = 3.0 * (b0 / (a0 * d0)) * t + 1.0
        v = 3.0 * (c0 / (b0 * d0)) * t + 1.0
        vals = np.concatenate(
            [
                a0 * u ** (1.0 / 3.0),
                b0 * u ** (-1.0 / 3.0) * v ** (1.0 / 3.0),
                c0 * v ** (-1.0 / 3.0),
                d0 * u ** (1.0 / 3.0) * v ** (1.0 / 3.0),
            ],
            axis=1,
        )
        mask = np.ones(4, dtype=bool)
    elif cid in ("a7", "a8"):
        b0, c0, d0 = v0[1], v0[2], v0[3]
        vals = np.full((t.shape[0], 4), np.nan)
        vals[:, 3] = d0 * (1.0 + 3.0 * d0 * t[:, 0] / (b0 * c0)) ** (-1.0 / 3.0)
        mask = np.zeros(4, dtype=bool)
        mask[3] = True
    elif not gc.is_lie:
        # Einstein / space-form factors: linear growth at the reference rate
        r = np.asarray(gc.analytic_ric, dtype=float)
        vals = v0 - 2.0 * r * t
        mask = np.ones(v0.size, dtype=bool)
    elif cid in ("r1", "r3", "a1"):
        vals = np.tile(v0, (t.shape[0], 1))
        mask = np.ones(v0.size, dtype=bool)
    else:
        raise UnsupportedClassError(f"no closed-form solution recorded for class {gc.id!r}")
    return ClosedForm(vals[0] if scalar else vals, mask)


def type_iii_sup(traj: Trajectory) -> float:
    """sup over samples of t * max|K| (the type-III monitor)."""
    if traj.times.size == 0:
        raise ValidationError("empty trajectory")
    return float(np.max(traj.t_max_k))
