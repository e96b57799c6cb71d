"""Harmonic-Einstein system on a flat SPD-matrix bundle over the circle.

State: a field G(alpha) of unit-determinant symmetric positive-definite
N x N matrices on a 2*pi-periodic grid, twisted at the seam by a fixed
holonomy matrix (G(alpha + 2*pi) = rho G(alpha) rho^T), together with a
base metric g(alpha) dalpha^2 and a time t.  The coupled evolution

    d/dt g = 1/2 * Tr((G^-1 G')^2)
    d/dt G = (1/g) * (G'' - g'/(2g) G' - G' G^-1 G')

is the Ricci flow of the total-space metric g dalpha^2 + G_ij dy^i dy^j.
Its self-similar states pair a harmonic (geodesic) loop G in the symmetric
space of unit-determinant SPD matrices with the base metric g = 2 t tau,
where tau = 1/4 Tr((G^-1 G')^2) is the map's energy density.

Spatial derivatives use 4th-order central stencils on a twist-padded grid;
time stepping is classical RK4 under a parabolic CFL bound, with the
determinant renormalized to 1 after every step (drift logged).  A numba
kernel carries the long runs, with a pure-numpy twin kept for cross-checks
and as a fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import config
from .curvature import Chart, coordinate_ricci_oracle, spd2_chart
from .errors import ConfigurationError, NumericalError, ValidationError

__all__ = [
    "BundleState",
    "BundleTrajectory",
    "BundleSamplers",
    "BundleCurvature",
    "sym_space_exp",
    "sym_space_metric",
    "geodesic_generator",
    "constant_state",
    "geodesic_state",
    "fourier_state",
    "twisted_derivatives",
    "tension_density",
    "harmonic_residual",
    "harmonic_residual_norm",
    "einstein_residual",
    "expansion_margin",
    "energy",
    "v_tilde",
    "det_drift",
    "gauge_transform",
    "bundle_flow",
    "geodesic_samplers",
    "bundle_curvature",
    "identity_map_check",
]


# ---------------------------------------------------------------------------
# the symmetric space of unit-determinant SPD matrices
# ---------------------------------------------------------------------------


def _as_symmetric(x, name: str, tol: float = 1e-12) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(x))))
    defect = float(np.max(np.abs(x - x.T)))
    if defect > tol * scale:
        raise ValidationError(f"{name} is not symmetric (defect {defect:.3e})")
    return 0.5 * (x + x.T)


def sym_space_exp(X, s: float = 1.0) -> np.ndarray:
    """Geodesic point exp(s*X) for a traceless symmetric direction X.

    Geodesics through the identity of the unit-determinant SPD space are
    exactly these one-parameter exponentials; the result is symmetric
    positive definite with determinant renormalized to 1.
    """
    X = _as_symmetric(X, "X")
    scale = max(1.0, float(np.max(np.abs(X))))
    tr = abs(float(np.trace(X)))
    if tr > 1e-14 * scale * X.shape[0]:
        raise ValidationError(f"X must be traceless (trace {tr:.3e})")
    w, q = np.linalg.eigh(float(s) * X)
    g = (q * np.exp(w)) @ q.T
    g = 0.5 * (g + g.T)
    d = float(np.linalg.det(g))
    if not np.isfinite(d) or abs(d - 1.0) > 1e-8:
        raise NumericalError(f"exponential lost unimodularity (det {d!r})")
    return g * d ** (-1.0 / X.shape[0])


def sym_space_metric(G, K) -> float:
    """Invariant metric <K, K>_G = Tr(G^-1 K G^-1 K) on symmetric tangents."""
    G = _as_symmetric(G, "G")
    K = _as_symmetric(K, "K")
    if G.shape != K.shape:
        raise ValidationError("G and K must have matching shapes")
    a = np.linalg.solve(G, K)
    return float(np.trace(a @ a))


def _spd_log(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    w, q = np.linalg.eigh(m)
    if w[0] <= 0.0:
        raise ValidationError(f"{name} is not positive definite")
    return (q * np.log(w)) @ q.T


def _spd_power(m: np.ndarray, p: float) -> np.ndarray:
    w, q = np.linalg.eigh(m)
    return (q * w**p) @ q.T


def geodesic_generator(rho) -> np.ndarray:
    """Traceless symmetric X with exp(X) = rho rho^T.

    The loop G(alpha) = exp((alpha/2pi) X) then satisfies the twist
    condition G(alpha + 2pi) = rho G(alpha) rho^T for any *symmetric*
    unimodular rho (rho commutes with every power of rho^2).
    """
    rho = _as_symmetric(rho, "rho")
    x = _spd_log(rho @ rho.T, "rho rho^T")
    x = 0.5 * (x + x.T)
    # |det rho| = 1 makes the trace a pure roundoff quantity
    x -= (np.trace(x) / rho.shape[0]) * np.eye(rho.shape[0])
    return x


# ---------------------------------------------------------------------------
# bundle states
# ---------------------------------------------------------------------------


@dataclass
class BundleState:
    """Grid state: base metric, twisted SPD fiber field, holonomy, time.

    Grid points sit at alpha_k = 2*pi*k/M on the half-open circle [0, 2pi).
    Construction symmetrizes the fiber field and renormalizes determinants
    (both must already hold to 1e-10); anything worse is rejected.
    """

    g_base: np.ndarray
    G: np.ndarray
    rho: np.ndarray
    t: float

    def __post_init__(self) -> None:
        g = np.array(self.g_base, dtype=float)
        G = np.array(self.G, dtype=float)
        rho = np.array(self.rho, dtype=float)
        if g.ndim != 1:
            raise ValidationError("g_base must be a 1-d array of grid values")
        m = g.size
        if m < 8:
            raise ConfigurationError(f"grid too coarse: M = {m} < 8")
        if G.ndim != 3 or G.shape[0] != m or G.shape[1] != G.shape[2]:
            raise ValidationError(f"G must have shape (M, N, N), got {G.shape}")
        n = G.shape[1]
        if rho.shape != (n, n):
            raise ValidationError(f"holonomy must be {n}x{n}, got {rho.shape}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(G)) and np.all(np.isfinite(rho))):
            raise ValidationError("state contains non-finite entries")
        if np.min(g) <= 0.0:
            raise ValidationError("base metric must be positive everywhere")
        t = float(self.t)
        if not np.isfinite(t) or t <= 0.0:
            raise ValidationError(f"time must be positive, got {t!r}")
        if abs(abs(float(np.linalg.det(rho))) - 1.0) > 1e-10:
            raise ValidationError("holonomy must be unimodular (|det| = 1)")
        sym_defect = float(np.max(np.abs(G - np.transpose(G, (0, 2, 1)))))
        if sym_defect > 1e-10 * max(1.0, float(np.max(np.abs(G)))):
            raise ValidationError(f"fiber field is not symmetric (defect {sym_defect:.3e})")
        G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
        dets = np.linalg.det(G)
        if float(np.max(np.abs(dets - 1.0))) > 1e-10:
            raise ValidationError("fiber field must have unit determinant")
        ev_min = float(np.min(np.linalg.eigvalsh(G)))
        if ev_min <= 0.0:
            raise ValidationError("fiber field must be positive definite")
        G *= dets[:, None, None] ** (-1.0 / n)
        self.g_base = g
        self.G = G
        self.rho = rho
        self.t = t

    @property
    def grid_size(self) -> int:
        return self.g_base.size

    @property
    def fiber_dim(self) -> int:
        return self.G.shape[1]

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.grid_size

    @property
    def alpha(self) -> np.ndarray:
        return np.arange(self.grid_size) * self.h


def _conjugate(a: np.ndarray, G: np.ndarray) -> np.ndarray:
    """a G a^T applied along the leading grid axis."""
    return np.einsum("ij,mjk,lk->mil", a, G, a)


def _padded_fields(state: BundleState):
    """Fields extended by two twisted ghost cells on each side."""
    g = state.g_base
    G = state.G
    rho = state.rho
    rho_inv = np.linalg.inv(rho)
    gp = np.concatenate([g[-2:], g, g[:2]])
    Gp = np.concatenate([_conjugate(rho_inv, G[-2:]), G, _conjugate(rho, G[:2])])
    return gp, Gp


def twisted_derivatives(state: BundleState):
    """(g', G', G'') by 4th-order central differences on the twisted grid."""
    gp, Gp = _padded_fields(state)
    h = state.h
    g1 = (-gp[4:] + 8.0 * gp[3:-1] - 8.0 * gp[1:-3] + gp[:-4]) / (12.0 * h)
    G1 = (-Gp[4:] + 8.0 * Gp[3:-1] - 8.0 * Gp[1:-3] + Gp[:-4]) / (12.0 * h)
    G2 = (-Gp[4:] + 16.0 * Gp[3:-1] - 30.0 * Gp[2:-2] + 16.0 * Gp[1:-3] - Gp[:-4]) / (
        12.0 * h * h
    )
    return g1, G1, G2


def tension_density(state: BundleState) -> np.ndarray:
    """Energy density tau = 1/4 Tr((G^-1 G')^2) per grid point (>= 0)."""
    _, G1, _ = twisted_derivatives(state)
    a = np.linalg.solve(state.G, G1)
    return 0.25 * np.einsum("mij,mji->m", a, a)


def harmonic_residual(state: BundleState) -> np.ndarray:
    """Residual field (1/g)(G'' - g'/(2g) G' - G' G^-1 G'); zero iff G is harmonic."""
    g = state.g_base
    g1, G1, G2 = twisted_derivatives(state)
    a = np.linalg.solve(state.G, G1)
    return (G2 - (g1 / (2.0 * g))[:, None, None] * G1 - G1 @ a) / g[:, None, None]


def harmonic_residual_norm(state: BundleState) -> np.ndarray:
    """Pointwise invariant norm sqrt(<H, H>_G) of the harmonic residual.

    Measuring the residual in the fiber metric keeps the report unchanged
    under constant gauge transformations G -> A G A^T.
    """
    h_field = harmonic_residual(state)
    a = np.linalg.solve(state.G, h_field)
    sq = np.einsum("mij,mji->m", a, a)
    return np.sqrt(np.maximum(sq, 0.0))


def einstein_residual(state: BundleState, t: Optional[float] = None) -> np.ndarray:
    """Base-direction soliton residual -1/4 Tr((G^-1 G')^2) + g/(2t) per point."""
    tt = state.t if t is None else float(t)
    if tt <= 0.0:
        raise ValidationError("t must be positive")
    return -tension_density(state) + state.g_base / (2.0 * tt)


def expansion_margin(state: BundleState, t: Optional[float] = None) -> float:
    """Spatial minimum of 1/(2t) - tau/g.

    Nonnegativity of this scalar is what makes the normalized volume
    nonincreasing; it can start negative for arbitrary data at t0 > 0, so
    it is reported rather than asserted.
    """
    tt = state.t if t is None else float(t)
    return float(np.min(1.0 / (2.0 * tt) - tension_density(state) / state.g_base))


def energy(state: BundleState) -> float:
    """Dirichlet energy 1/2 int g^{-1} Tr((G^-1 G')^2) dvol over the circle."""
    dens = 4.0 * tension_density(state) / np.sqrt(state.g_base)
    return float(0.5 * state.h * np.add.reduce(dens))


def v_tilde(state: BundleState, t: Optional[float] = None) -> float:
    """Scale-normalized base volume t^(-1/2) * sum sqrt(g) * dalpha."""
    tt = state.t if t is None else float(t)
    return float(state.h * np.add.reduce(np.sqrt(state.g_base)) / math.sqrt(tt))


def det_drift(G) -> float:
    """Largest |det - 1| over a field (or single matrix) of fiber points."""
    d = np.linalg.det(np.asarray(G, dtype=float))
    return float(np.max(np.abs(d - 1.0)))


def gauge_transform(state: BundleState, a) -> BundleState:
    """Constant change of fiber basis: G -> A G A^T, rho -> A rho A^-1."""
    a = np.asarray(a, dtype=float)
    n = state.fiber_dim
    if a.shape != (n, n):
        raise ValidationError(f"gauge matrix must be {n}x{n}")
    if abs(abs(float(np.linalg.det(a))) - 1.0) > 1e-12:
        raise ValidationError("gauge matrix must have |det| = 1")
    a_inv = np.linalg.inv(a)
    return BundleState(
        g_base=state.g_base.copy(),
        G=_conjugate(a, state.G),
        rho=a @ state.rho @ a_inv,
        t=state.t,
    )


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def _seed_base(G: np.ndarray, rho: np.ndarray, t: float, margin: float) -> np.ndarray:
    """Base metric 2*t*(1+margin)*max(tau, floor) adapted to a fiber field.

    margin = 0 puts the state exactly on the self-similar profile (when G is
    harmonic); margin > 0 inflates the base so the normalized volume starts
    strictly decreasing.  The floor keeps g positive where tau vanishes.
    """
    m = G.shape[0]
    probe = BundleState(g_base=np.ones(m), G=G, rho=rho, t=t)
    tau = tension_density(probe)
    top = float(np.max(tau))
    floor = max(1e-3, config.BUNDLE_SEED_FLOOR * top)
    return 2.0 * t * (1.0 + margin) * np.maximum(tau, floor)


def constant_state(
    grid_size: int,
    fiber_dim: int = 2,
    rho=None,
    t: float = config.BUNDLE_T0,
    g_value: float = 1.0,
    point=None,
) -> BundleState:
    """Constant fiber field (identity by default); needs a holonomy fixing it."""
    n = fiber_dim
    rho = np.eye(n) if rho is None else np.asarray(rho, dtype=float)
    G0 = np.eye(n) if point is None else _as_symmetric(point, "point")
    if float(np.max(np.abs(rho @ G0 @ rho.T - G0))) > 1e-10:
        raise ValidationError("constant seed needs a holonomy fixing the fiber point")
    G = np.broadcast_to(G0, (grid_size, n, n)).copy()
    return BundleState(g_base=np.full(grid_size, float(g_value)), G=G, rho=rho, t=t)


def geodesic_state(
    grid_size: int,
    rho=None,
    generator=None,
    t: float = config.BUNDLE_T0,
    margin: float = 0.0,
) -> BundleState:
    """Geodesic loop G(alpha) = exp((alpha/2pi) X) with its adapted base.

    Either pass a symmetric unimodular holonomy (X is fitted to it) or a
    traceless symmetric generator directly (the matching holonomy exp(X/2)
    is synthesized).  With margin = 0 the base metric is the self-similar
    profile 2*t*tau, so both residual fields vanish to stencil accuracy.
    """
    if generator is None:
        if rho is None:
            raise ValidationError("geodesic seed needs a holonomy or a generator")
        x = geodesic_generator(rho)
        rho = np.asarray(rho, dtype=float)
    else:
        x = _as_symmetric(generator, "generator")
        if abs(float(np.trace(x))) > 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            raise ValidationError("generator must be traceless")
        if rho is None:
            w, q = np.linalg.eigh(0.5 * x)
            rho = (q * np.exp(w)) @ q.T
        else:
            rho = np.asarray(rho, dtype=float)
    m = int(grid_size)
    alpha = np.arange(m) * (2.0 * math.pi / m)
    w, q = np.linalg.eigh(x)
    G = np.einsum("ij,mj,kj->mik", q, np.exp(np.outer(alpha / (2.0 * math.pi), w)), q)
    g = _seed_base(G, rho, t, margin)
    return BundleState(g_base=g, G=G, rho=rho, t=t)


def fourier_state(
    grid_size: int,
    rho=None,
    fiber_dim: int = 2,
    t: float = config.BUNDLE_T0,
    amplitude: float = config.BUNDLE_SEED_AMPLITUDE,
    modes: int = config.BUNDLE_SEED_MODES,
    seed: int = config.BUNDLE_SEED_RNG,
    margin: float = config.BUNDLE_SEED_MARGIN,
) -> BundleState:
    """Random periodic perturbation of the holonomy-adapted geodesic.

    G = W exp(P) W^T with W = (rho rho^T)^(alpha/4pi) and P a seeded random
    symmetric traceless trigonometric polynomial scaled to peak Frobenius
    norm `amplitude`.  The twist condition holds exactly for symmetric
    positive-definite holonomies (W commutes with rho).
    """
    n = int(fiber_dim)
    if rho is None:
        rho = np.eye(n)
    rho = _as_symmetric(rho, "rho")
    n = rho.shape[0]
    ev = np.linalg.eigvalsh(rho)
    if ev[0] <= 0.0:
        raise ValidationError(
            "fourier seed needs a symmetric positive-definite holonomy"
        )
    if modes < 1:
        raise ConfigurationError(f"modes must be >= 1, got {modes}")
    m = int(grid_size)
    alpha = np.arange(m) * (2.0 * math.pi / m)
    rng = np.random.default_rng(seed)

    def random_traceless() -> np.ndarray:
        s = rng.standard_normal((n, n))
        s = 0.5 * (s + s.T)
        return s - (np.trace(s) / n) * np.eye(n)

    p = np.zeros((m, n, n))
    for mode in range(1, modes + 1):
        cos_part = random_traceless()
        sin_part = random_traceless()
        p += np.cos(mode * alpha)[:, None, None] * cos_part
        p += np.sin(mode * alpha)[:, None, None] * sin_part
    peak = float(np.max(np.sqrt(np.einsum("mij,mij->m", p, p))))
    if peak > 0.0:
        p *= amplitude / peak
    x = geodesic_generator(rho)
    wx, qx = np.linalg.eigh(x)
    wfac = np.einsum(
        "ij,mj,kj->mik", qx, np.exp(np.outer(alpha / (4.0 * math.pi), wx)), qx
    )
    wp, qp = np.linalg.eigh(p)
    expp = np.einsum("mij,mj,mkj->mik", qp, np.exp(wp), qp)
    G = wfac @ expp @ np.transpose(wfac, (0, 2, 1))
    g = _seed_base(G, rho, t, margin)
    return BundleState(g_base=g, G=G, rho=rho, t=t)


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


@dataclass
class BundleTrajectory:
    """Sampled bundle flow with per-sample diagnostics and step monitors."""

    times: np.ndarray
    states: list
    energies: np.ndarray
    v_tildes: np.ndarray
    max_harmonic: np.ndarray
    max_einstein: np.ndarray
    det_drifts: np.ndarray
    expansion_margins: np.ndarray
    steps: int
    rejected_steps: int
    v_tilde_increase_max: Optional[float] = None
    energy_increase_max: Optional[float] = None
    terminated_reason: Optional[str] = None

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> BundleState:
        return self.states[-1]


def _rhs_numpy(g, G, rho, rho_inv, h, fixed_base):
    gp = np.concatenate([g[-2:], g, g[:2]])
    Gp = np.concatenate([_conjugate(rho_inv, G[-2:]), G, _conjugate(rho, G[:2])])
    g1 = (-gp[4:] + 8.0 * gp[3:-1] - 8.0 * gp[1:-3] + gp[:-4]) / (12.0 * h)
    G1 = (-Gp[4:] + 8.0 * Gp[3:-1] - 8.0 * Gp[1:-3] + Gp[:-4]) / (12.0 * h)
    G2 = (-Gp[4:] + 16.0 * Gp[3:-1] - 30.0 * Gp[2:-2] + 16.0 * Gp[1:-3] - Gp[:-4]) / (
        12.0 * h * h
    )
    a = np.linalg.solve(G, G1)
    dG = (G2 - (g1 / (2.0 * g))[:, None, None] * G1 - G1 @ a) / g[:, None, None]
    if fixed_base:
        dg = np.zeros_like(g)
    else:
        dg = 0.5 * np.einsum("mij,mji->m", a, a)
    return dg, dG


def _energy_numpy(g, G, rho, rho_inv, h):
    gp = np.concatenate([g[-2:], g, g[:2]])
    Gp = np.concatenate([_conjugate(rho_inv, G[-2:]), G, _conjugate(rho, G[:2])])
    G1 = (-Gp[4:] + 8.0 * Gp[3:-1] - 8.0 * Gp[1:-3] + Gp[:-4]) / (12.0 * h)
    a = np.linalg.solve(G, G1)
    dens = np.einsum("mij,mji->m", a, a) / np.sqrt(g)
    return float(0.5 * h * np.add.reduce(dens))


_KERNELS = None


def _get_kernels():
    """Compile (once) and return the numba step kernel, or None."""
    global _KERNELS
    if _KERNELS is not None:
        return _KERNELS
    try:
        from ._bundle_kernel import flow_kernel
    except ImportError:
        _KERNELS = False
        return False
    _KERNELS = flow_kernel
    return _KERNELS


def _flow_python(g, G, rho, rho_inv, h, t0, t_end, targets, cfl, fixed_base, max_steps):
    """Pure-numpy twin of the numba step kernel (same scheme, same monitors)."""
    m = g.size
    n = G.shape[1]
    n_t = targets.size
    out_t = np.zeros(n_t)
    out_g = np.zeros((n_t, m))
    out_G = np.zeros((n_t, m, n, n))
    out_drift = np.zeros(n_t)
    t_hi, t_lo = t0, 0.0
    steps = rejected = nsamp = 0
    drift_seg = 0.0
    worst_inc = -np.inf
    cfl_eff = cfl
    if fixed_base:
        mon_old = _energy_numpy(g, G, rho, rho_inv, h)
    else:
        mon_old = h * np.add.reduce(np.sqrt(g)) / math.sqrt(t0)
    status = 0
    while t_hi + t_lo < t_end:
        if steps >= max_steps:
            status = 2
            break
        ming = float(np.min(g))
        if not np.isfinite(ming) or ming <= 0.0:
            status = 1
            break
        dt = cfl_eff * h * h * ming
        t_now = t_hi + t_lo
        if t_now + dt > t_end:
            dt = t_end - t_now
        k1g, k1G = _rhs_numpy(g, G, rho, rho_inv, h, fixed_base)
        k2g, k2G = _rhs_numpy(g + 0.5 * dt * k1g, G + 0.5 * dt * k1G, rho, rho_inv, h, fixed_base)
        k3g, k3G = _rhs_numpy(g + 0.5 * dt * k2g, G + 0.5 * dt * k2G, rho, rho_inv, h, fixed_base)
        k4g, k4G = _rhs_numpy(g + dt * k3g, G + dt * k3G, rho, rho_inv, h, fixed_base)
        gn = g + (dt / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        Gn = G + (dt / 6.0) * (k1G + 2.0 * k2G + 2.0 * k3G + k4G)
        dets = np.linalg.det(Gn)
        ok = (
            np.all(np.isfinite(gn))
            and np.all(np.isfinite(Gn))
            and np.min(gn) > 0.0
            and np.min(dets) > 0.0
        )
        if not ok:
            rejected += 1
            cfl_eff *= 0.5
            if cfl_eff < 1e-3 * cfl:
                status = 1
                break
            continue
        g = gn
        Gn = 0.5 * (Gn + np.transpose(Gn, (0, 2, 1)))
        drift = float(np.max(np.abs(dets - 1.0)))
        drift_seg = max(drift_seg, drift)
        G = Gn * dets[:, None, None] ** (-1.0 / n)
        # compensated time accumulation (t_lo carries the unabsorbed deficit)
        y = dt + t_lo
        t_new = t_hi + y
        t_lo = y - (t_new - t_hi)
        t_hi = t_new
        steps += 1
        if fixed_base:
            mon_new = _energy_numpy(g, G, rho, rho_inv, h)
        else:
            mon_new = h * np.add.reduce(np.sqrt(g)) / math.sqrt(t_hi + t_lo)
        worst_inc = max(worst_inc, mon_new - mon_old)
        mon_old = mon_new
        while nsamp < n_t and t_hi + t_lo >= targets[nsamp] * (1.0 - 1e-12):
            out_t[nsamp] = t_hi + t_lo
            out_g[nsamp] = g
            out_G[nsamp] = G
            out_drift[nsamp] = drift_seg
            drift_seg = 0.0
            nsamp += 1
    return status, nsamp, steps, rejected, worst_inc, out_t, out_g, out_G, out_drift


def bundle_flow(
    state: BundleState,
    t1: float,
    cfl: float = config.BUNDLE_CFL,
    samples_per_decade: int = config.BUNDLE_SAMPLES_PER_DECADE,
    fixed_base: bool = False,
    use_numba: bool = True,
    max_steps: int = config.BUNDLE_MAX_STEPS,
) -> BundleTrajectory:
    """Integrate the coupled base/fiber flow from state.t to t1.

    RK4 with step cfl*h^2*min(g) (recomputed every step, halved on the rare
    rejected step), exact determinant renormalization each step with the
    drift logged per sample.  `fixed_base` freezes g and runs the pure
    harmonic heat flow; there the per-step monitor is the energy instead of
    the normalized volume.  A failed run (base collapse or step budget) is
    returned with `terminated_reason` set rather than raised, so partial
    output stays available.
    """
    t1 = float(t1)
    if not np.isfinite(t1) or t1 <= state.t:
        raise ValidationError(f"t1 must exceed the state time {state.t}")
    if cfl <= 0.0 or cfl > 0.52:
        raise ConfigurationError(f"cfl must lie in (0, 0.52], got {cfl}")
    if samples_per_decade < 1:
        raise ConfigurationError("samples_per_decade must be >= 1")
    decades = math.log10(t1 / state.t)
    n_samples = max(2, int(math.ceil(decades * samples_per_decade)) + 1)
    targets = np.geomspace(state.t, t1, n_samples)[1:]
    targets[-1] = t1
    rho_inv = np.linalg.inv(state.rho)
    g0 = state.g_base.copy()
    G0 = state.G.copy()
    kernel = _get_kernels() if use_numba else False
    if kernel:
        m, n = state.grid_size, state.fiber_dim
        out_t = np.zeros(targets.size)
        out_g = np.zeros((targets.size, m))
        out_G = np.zeros((targets.size, m, n, n))
        out_drift = np.zeros(targets.size)
        status, nsamp, steps, rejected, worst_inc = kernel(
            g0,
            G0,
            state.rho.copy(),
            rho_inv.copy(),
            state.h,
            state.t,
            t1,
            targets,
            cfl,
            fixed_base,
            max_steps,
            out_t,
            out_g,
            out_G,
            out_drift,
        )
    else:
        status, nsamp, steps, rejected, worst_inc, out_t, out_g, out_G, out_drift = (
            _flow_python(
                g0, G0, state.rho, rho_inv, state.h, state.t, t1, targets, cfl,
                fixed_base, max_steps,
            )
        )
    reason = None
    if status == 1:
        reason = "base metric collapsed or step size underflowed"
    elif status == 2:
        reason = "step budget exhausted"
    times = [state.t]
    states = [state]
    drifts = [0.0]
    for i in range(nsamp):
        st = BundleState(g_base=out_g[i], G=out_G[i], rho=state.rho, t=out_t[i])
        times.append(out_t[i])
        states.append(st)
        drifts.append(out_drift[i])
    energies = np.array([energy(s) for s in states])
    v_tildes = np.array([v_tilde(s) for s in states])
    max_harm = np.array([float(np.max(harmonic_residual_norm(s))) for s in states])
    max_eins = np.array([float(np.max(np.abs(einstein_residual(s)))) for s in states])
    margins = np.array([expansion_margin(s) for s in states])
    return BundleTrajectory(
        times=np.array(times),
        states=states,
        energies=energies,
        v_tildes=v_tildes,
        max_harmonic=max_harm,
        max_einstein=max_eins,
        det_drifts=np.array(drifts),
        expansion_margins=margins,
        steps=steps,
        rejected_steps=rejected,
        v_tilde_increase_max=None if fixed_base else float(worst_inc),
        energy_increase_max=float(worst_inc) if fixed_base else None,
        terminated_reason=reason,
    )


# ---------------------------------------------------------------------------
# curvature of the total space
# ---------------------------------------------------------------------------


@dataclass
class BundleSamplers:
    """Analytic bundle data: callables for g(alpha) and G(alpha).

    Derivative callables are optional; missing ones are filled by 4th-order
    central differences with Richardson refinement of the samplers.
    """

    g: Callable[[float], float]
    G: Callable[[float], np.ndarray]
    dg: Optional[Callable[[float], float]] = None
    dG: Optional[Callable[[float], np.ndarray]] = None
    d2G: Optional[Callable[[float], np.ndarray]] = None
    step: float = config.ORACLE_STEP


def _fd1(f, x: float, h: float):
    a = (np.asarray(f(x - 2 * h)) - 8.0 * np.asarray(f(x - h))
         + 8.0 * np.asarray(f(x + h)) - np.asarray(f(x + 2 * h)))
    return -a / (12.0 * h)


def _fd2(f, x: float, h: float):
    return (
        -np.asarray(f(x + 2 * h))
        + 16.0 * np.asarray(f(x + h))
        - 30.0 * np.asarray(f(x))
        + 16.0 * np.asarray(f(x - h))
        - np.asarray(f(x - 2 * h))
    ) / (12.0 * h * h)


@dataclass
class BundleCurvature:
    """Curvature families of g dalpha^2 + G_ij dy^i dy^j at sample points.

    `mixed` holds R^alpha_{i alpha j}; `fiber_base` holds R^i_{j alpha alpha}
    (identically zero over a 1-d base and kept for shape completeness);
    `fiber_riemann` holds R^i_{jkl}.  Both Ricci blocks are computed twice -
    directly from the closed formulas and by tracing the families - and the
    worst disagreement is recorded, as is the residual of the trace identity
    g^{ij} Ric_ij = -(det G)^(-1/2) g^{alpha beta} (sqrt(det G))_{;alpha beta}.
    """

    alpha: np.ndarray
    mixed: np.ndarray
    fiber_base: np.ndarray
    fiber_riemann: np.ndarray
    ricci_base: np.ndarray
    ricci_fiber: np.ndarray
    ricci_consistency: float
    trace_identity_residual: np.ndarray


def _curvature_pointwise(g, g1, G, G1, G2, sqrtdet, sqrtdet1, sqrtdet2):
    npts = g.shape[0]
    n = G.shape[1]
    gi = np.linalg.inv(G)
    a = gi @ G1                       # G^-1 G'
    gamma = g1 / (2.0 * g)            # base Christoffel
    Gcov = G2 - gamma[:, None, None] * G1
    mixed = (-0.5 * Gcov + 0.25 * (G1 @ a)) / g[:, None, None]
    fiber_base = np.zeros((npts, n, n))
    riem = (
        -np.einsum("mik,mjl->mijkl", a, G1) + np.einsum("mil,mjk->mijkl", a, G1)
    ) / (4.0 * g[:, None, None, None, None])
    tr_a = np.einsum("mii->m", a)
    ricci_fiber = (
        -0.5 * Gcov + 0.5 * (G1 @ a) - 0.25 * tr_a[:, None, None] * G1
    ) / g[:, None, None]
    ricci_base = (
        -0.5 * np.einsum("mij,mji->m", gi, Gcov)
        + 0.25 * np.einsum("mij,mji->m", a, a)
    )
    # same blocks by tracing the component families
    ricci_fiber_tr = mixed + np.einsum("mkikj->mij", riem)
    ricci_base_tr = g * np.einsum("mij,mji->m", gi, mixed)
    consistency = max(
        float(np.max(np.abs(ricci_fiber - ricci_fiber_tr))),
        float(np.max(np.abs(ricci_base - ricci_base_tr))),
    )
    lhs = np.einsum("mij,mji->m", gi, ricci_fiber)
    rhs = -(sqrtdet2 - gamma * sqrtdet1) / (sqrtdet * g)
    return mixed, fiber_base, riem, ricci_base, ricci_fiber, consistency, lhs - rhs


def bundle_curvature(data, alpha=None) -> BundleCurvature:
    """Curvature families from a grid state or analytic samplers.

    For a BundleState the derivatives come from the twisted stencils and
    the trace-identity right side from stencils applied to the determinant
    field itself (an independent route; it vanishes identically on
    unit-determinant states).
    """
    if isinstance(data, BundleState):
        g = data.g_base
        G = data.G
        g1, G1, G2 = twisted_derivatives(data)
        gp, Gp = _padded_fields(data)
        sd = np.sqrt(np.linalg.det(Gp))
        h = data.h
        sd1 = (-sd[4:] + 8.0 * sd[3:-1] - 8.0 * sd[1:-3] + sd[:-4]) / (12.0 * h)
        sd2 = (-sd[4:] + 16.0 * sd[3:-1] - 30.0 * sd[2:-2] + 16.0 * sd[1:-3] - sd[:-4]) / (
            12.0 * h * h
        )
        pts = data.alpha
        sdet = sd[2:-2]
    elif isinstance(data, BundleSamplers):
        if alpha is None:
            raise ValidationError("analytic samplers need explicit sample points")
        pts = np.atleast_1d(np.asarray(alpha, dtype=float))
        st = data.step
        g = np.array([float(data.g(x)) for x in pts])
        G = np.array([data.G(x) for x in pts], dtype=float)
        if data.dg is not None:
            g1 = np.array([float(data.dg(x)) for x in pts])
        else:
            fine = np.array([float(_fd1(data.g, x, 0.5 * st)) for x in pts])
            coarse = np.array([float(_fd1(data.g, x, st)) for x in pts])
            g1 = (16.0 * fine - coarse) / 15.0
        if data.dG is not None:
            G1 = np.array([data.dG(x) for x in pts], dtype=float)
        else:
            fine = np.array([_fd1(data.G, x, 0.5 * st) for x in pts])
            coarse = np.array([_fd1(data.G, x, st) for x in pts])
            G1 = (16.0 * fine - coarse) / 15.0
        if data.d2G is not None:
            G2 = np.array([data.d2G(x) for x in pts], dtype=float)
        else:
            fine = np.array([_fd2(data.G, x, 0.5 * st) for x in pts])
            coarse = np.array([_fd2(data.G, x, st) for x in pts])
            G2 = (16.0 * fine - coarse) / 15.0

        # determinant-root derivatives via Jacobi's formula, exact in G1/G2:
        # (ln det G)' = Tr(G^-1 G'), so s = sqrt(det G) obeys
        # s' = s/2 * Tr(G^-1 G') and s'' picks up Tr(G^-1 G'') - Tr((G^-1 G')^2)
        a = np.linalg.solve(G, G1)
        tr1 = np.einsum("mii->m", a)
        tr2 = np.einsum("mii->m", np.linalg.solve(G, G2))
        sdet = np.sqrt(np.linalg.det(G))
        sd1 = 0.5 * sdet * tr1
        sd2 = 0.5 * (sd1 * tr1 + sdet * (tr2 - np.einsum("mij,mji->m", a, a)))
    else:
        raise ValidationError("data must be a BundleState or BundleSamplers")
    mixed, fb, riem, rb, rf, cons, trace_res = _curvature_pointwise(
        g, g1, G, G1, G2, sdet, sd1, sd2
    )
    return BundleCurvature(
        alpha=pts,
        mixed=mixed,
        fiber_base=fb,
        fiber_riemann=riem,
        ricci_base=rb,
        ricci_fiber=rf,
        ricci_consistency=cons,
        trace_identity_residual=trace_res,
    )


def geodesic_samplers(generator, t: float = config.BUNDLE_T0) -> BundleSamplers:
    """Analytic samplers for the geodesic loop and its self-similar base."""
    x = _as_symmetric(generator, "generator")
    w, q = np.linalg.eigh(x)
    tr_x2 = float(np.sum(w * w))
    g_const = t * tr_x2 / (8.0 * math.pi * math.pi)

    def G(alpha: float) -> np.ndarray:
        return (q * np.exp((alpha / (2.0 * math.pi)) * w)) @ q.T

    def dG(alpha: float) -> np.ndarray:
        return (q * (w / (2.0 * math.pi)) * np.exp((alpha / (2.0 * math.pi)) * w)) @ q.T

    def d2G(alpha: float) -> np.ndarray:
        ww = (w / (2.0 * math.pi)) ** 2
        return (q * ww * np.exp((alpha / (2.0 * math.pi)) * w)) @ q.T

    return BundleSamplers(
        g=lambda _a: g_const,
        G=G,
        dg=lambda _a: 0.0,
        dG=dG,
        d2G=d2G,
    )


def total_space_chart(samplers: BundleSamplers) -> Chart:
    """Coordinate chart (alpha, y^1..y^N) of the full bundle metric.

    The metric is block diagonal, depends only on alpha, and feeds the
    coordinate finite-difference Ricci oracle for an independent check of
    the curvature families.
    """

    def chart(x: np.ndarray) -> np.ndarray:
        alpha = float(x[0])
        G = np.asarray(samplers.G(alpha), dtype=float)
        n = G.shape[0]
        out = np.zeros((n + 1, n + 1))
        out[0, 0] = float(samplers.g(alpha))
        out[1:, 1:] = G
        return out

    return chart


# ---------------------------------------------------------------------------
# identity-map check on the 2x2 symmetric-space base
# ---------------------------------------------------------------------------


def identity_map_check(t: float = 1.0, points=None, step: float = config.ORACLE_STEP) -> dict:
    """Base-direction soliton residual for the identity map of the SPD plane.

    The identity map of the unit-determinant SPD 2x2 space into itself is
    harmonic, and its pullback metric makes the base Einstein: Ric = lambda*s
    with lambda measured here by the coordinate finite-difference oracle.
    Scaling the base to a*s with a = 2t(1/4 - lambda) kills the residual
    Ric(a s) - (1/4) s + (a s)/(2t); the report carries lambda, a, and the
    worst residual entry over the sample points.
    """
    if t <= 0.0:
        raise ValidationError("t must be positive")
    if points is None:
        points = [(0.3, 1.2), (-0.5, 0.7), (1.0, 2.0)]
    chart = spd2_chart()
    lam_samples = []
    for p in points:
        x = np.asarray(p, dtype=float)
        s = np.asarray(chart(x))
        ric = coordinate_ricci_oracle(chart, x, step)
        lam_samples.append(ric[0, 0] / s[0, 0])
        lam_samples.append(ric[1, 1] / s[1, 1])
    lam = float(np.mean(lam_samples))
    a = 2.0 * t * (0.25 - lam)
    if a <= 0.0:
        raise NumericalError(f"scale came out nonpositive (lambda = {lam})")

    def scaled(x: np.ndarray) -> np.ndarray:
        return a * np.asarray(chart(x))

    worst = 0.0
    for p in points:
        x = np.asarray(p, dtype=float)
        s = np.asarray(chart(x))
        ric_scaled = coordinate_ricci_oracle(scaled, x, step)
        res = ric_scaled - 0.25 * s + (a / (2.0 * t)) * s
        worst = max(worst, float(np.max(np.abs(res))))
    return {"lambda": lam, "a": a, "t": t, "max_residual": worst}
