"""Curvature of left-invariant metrics, plus a coordinate-chart oracle.

Frame engine
------------
For a frame X_1..X_n with constant brackets and metric g_ij, the Levi-Civita
connection is determined algebraically:

    2 <nabla_{X_i} X_j, X_k> = <[X_i,X_j],X_k> - <[X_j,X_k],X_i> + <[X_k,X_i],X_j>

and the curvature operator is

    R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z,

signed so a bi-invariant round metric has positive sectional curvature.
``riemann`` stores R[l, i, j, k] = coefficient of X_l in R(X_i, X_j) X_k.

Coordinate oracle
-----------------
``coordinate_ricci_oracle`` differentiates an arbitrary metric sampler with
central differences (optionally Richardson-extrapolated).  It shares no code
with the frame engine, which makes it an independent check of the algebra
above.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import config
from .algebra import GeometryClass, StructureConstants
from .errors import UnsupportedClassError, ValidationError

__all__ = [
    "FrameMetric",
    "CurvatureReport",
    "connection",
    "riemann",
    "sectional",
    "ricci",
    "scalar_curvature",
    "bianchi_residual",
    "curvature_report",
    "tabulated_sectional",
    "max_abs_sectional",
    "coordinate_christoffel",
    "coordinate_riemann",
    "coordinate_ricci_oracle",
    "euclidean_chart",
    "halfplane_chart",
    "nil3_chart",
    "nil3_coframe",
    "spd2_chart",
]


@dataclass(frozen=True)
class FrameMetric:
    """Inner products g_ij = <X_i, X_j> of the frame, positive definite."""

    dim: int
    mat: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.mat, dtype=float)
        if m.shape != (self.dim, self.dim):
            raise ValidationError(f"metric must be {self.dim}x{self.dim}, got {m.shape}")
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-13 * (1.0 + np.max(np.abs(m)))):
            raise ValidationError("metric must be symmetric")
        if np.min(np.linalg.eigvalsh(m)) <= 0.0:
            raise ValidationError("metric must be positive definite")
        object.__setattr__(self, "mat", 0.5 * (m + m.T))

    @classmethod
    def diag(cls, coeffs) -> "FrameMetric":
        v = np.asarray(coeffs, dtype=float)
        return cls(v.size, np.diag(v))

    @property
    def is_diagonal(self) -> bool:
        return np.count_nonzero(self.mat - np.diag(np.diagonal(self.mat))) == 0


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, FrameMetric):
        return m.mat
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        return np.diag(a)
    return a


def connection(sc: StructureConstants, metric) -> np.ndarray:
    """Connection coefficients Gamma[l, i, j] with nabla_{X_i} X_j = Gamma[l,i,j] X_l."""
    g = _as_matrix(metric)
    gi = np.linalg.inv(g)
    # B[i, j, k] = <[X_i, X_j], X_k>
    b = np.einsum("mij,mk->ijk", sc.c, g)
    # transpose axes (2,0,1) sends b[i,j,k] -> b[j,k,i], and (1,2,0) -> b[k,i,j]
    rhs = 0.5 * (b - np.transpose(b, (2, 0, 1)) + np.transpose(b, (1, 2, 0)))
    return np.einsum("lk,ijk->lij", gi, rhs)


def riemann(sc: StructureConstants, metric) -> np.ndarray:
    """Curvature coefficients R[l, i, j, k] of R(X_i, X_j) X_k."""
    gamma = connection(sc, metric)
    t1 = np.einsum("mjk,lim->lijk", gamma, gamma)
    t3 = np.einsum("mij,lmk->lijk", sc.c, gamma)
    return t1 - np.transpose(t1, (0, 2, 1, 3)) - t3


def sectional(sc: StructureConstants, metric) -> np.ndarray:
    """Matrix of sectional curvatures of the frame planes (diagonal set to 0)."""
    g = _as_matrix(metric)
    r = riemann(sc, metric)
    # <R(X_i, X_j) X_j, X_i>
    rd = np.einsum("lijj->lij", r)
    num = np.einsum("li,lij->ij", g, rd)
    gd = np.diagonal(g)
    den = np.outer(gd, gd) - g * g
    np.fill_diagonal(den, 1.0)
    k = num / den
    np.fill_diagonal(k, 0.0)
    return k


def ricci(sc: StructureConstants, metric) -> np.ndarray:
    """Ricci tensor Ric(X_j, X_k) as a symmetric matrix."""
    r = riemann(sc, metric)
    return np.einsum("iijk->jk", r)


def scalar_curvature(sc: StructureConstants, metric) -> float:
    g = _as_matrix(metric)
    return float(np.einsum("jk,jk->", np.linalg.inv(g), ricci(sc, metric)))


def bianchi_residual(sc: StructureConstants, metric) -> float:
    """Max-norm of the cyclic (first Bianchi) sum of the curvature tensor."""
    r = riemann(sc, metric)
    total = r + np.transpose(r, (0, 2, 3, 1)) + np.transpose(r, (0, 3, 1, 2))
    return float(np.max(np.abs(total)))


@dataclass(frozen=True)
class CurvatureReport:
    class_id: str
    metric: np.ndarray
    connection: np.ndarray
    riemann: np.ndarray
    sectional: np.ndarray
    ricci: np.ndarray
    scalar: float
    bianchi: float

    def as_dict(self) -> dict:
        return {
            "class": self.class_id,
            "metric": self.metric.tolist(),
            "connection": self.connection.tolist(),
            "riemann": self.riemann.tolist(),
            "sectional": self.sectional.tolist(),
            "ricci": self.ricci.tolist(),
            "scalar": self.scalar,
            "bianchi_residual": self.bianchi,
        }


def curvature_report(gc: GeometryClass, metric) -> CurvatureReport:
    if not gc.is_lie:
        raise UnsupportedClassError(
            f"class {gc.id!r} is handled analytically and has no frame curvature report"
        )
    g = _as_matrix(metric)
    FrameMetric(gc.dim, g)  # validation
    ric = ricci(gc.algebra, g)
    if not np.allclose(ric, ric.T, rtol=0.0, atol=1e-12 * (1.0 + np.max(np.abs(ric)))):
        raise ValidationError("Ricci tensor failed the symmetry check")
    return CurvatureReport(
        class_id=gc.id,
        metric=g,
        connection=connection(gc.algebra, g),
        riemann=riemann(gc.algebra, g),
        sectional=sectional(gc.algebra, g),
        ricci=ric,
        scalar=scalar_curvature(gc.algebra, g),
        bianchi=bianchi_residual(gc.algebra, g),
    )


# ---------------------------------------------------------------------------
# tabulated sectional curvatures for the 3D catalog classes
# ---------------------------------------------------------------------------


def tabulated_sectional(class_id: str, coeffs) -> np.ndarray:
    """Closed-form K matrix of the diagonal metric diag(A, B, C).

    Available for the four 3D classes whose formulas are tabulated; used as a
    cross-check against the frame engine.
    """
    a, b, c = (float(x) for x in np.asarray(coeffs, dtype=float))
    den = 4.0 * a * b * c
    cid = class_id.lower()
    if cid == "sol3":
        k12 = ((a - c) ** 2 - 4.0 * c * c) / den
        k23 = ((a - c) ** 2 - 4.0 * a * a) / den
        k31 = (a + c) ** 2 / den
    elif cid == "nil3":
        k12 = a * a / den
        k23 = -3.0 * a * a / den
        k31 = a * a / den
    elif cid == "isom_r2":
        k23 = ((a + b) ** 2 - 4.0 * a * a) / den
        k31 = ((a + b) ** 2 - 4.0 * b * b) / den
        k12 = (a - b) ** 2 / den
    elif cid == "sl2r":
        k23 = ((b - c) ** 2 - a * (3.0 * a + 2.0 * b + 2.0 * c)) / den
        k31 = ((a - (b - c)) ** 2 - 4.0 * b * (b - c)) / den
        k12 = ((a + (b - c)) ** 2 + 4.0 * c * (b - c)) / den
    else:
        raise UnsupportedClassError(f"no tabulated sectional curvatures for class {class_id!r}")
    k = np.zeros((3, 3))
    k[0, 1] = k[1, 0] = k12
    k[1, 2] = k[2, 1] = k23
    k[2, 0] = k[0, 2] = k31
    return k


def max_abs_sectional(gc: GeometryClass, coeffs) -> float:
    """Largest |K| over the frame planes (analytic classes use their factor data)."""
    v = np.asarray(coeffs, dtype=float)
    if gc.is_lie:
        return float(np.max(np.abs(sectional(gc.algebra, np.diag(v)))))
    scale = np.asarray(gc.sectional_scale, dtype=float)
    return float(np.max(scale / v))


# ---------------------------------------------------------------------------
# coordinate finite-difference oracle
# ---------------------------------------------------------------------------

Chart = Callable[[np.ndarray], np.ndarray]


def coordinate_christoffel(chart: Chart, x, step: float = config.ORACLE_STEP) -> np.ndarray:
    """Christoffel symbols Gamma[c, a, b] at x from central differences of the chart."""
    x = np.asarray(x, dtype=float)
    n = x.size
    g = np.asarray(chart(x), dtype=float)
    gi = np.linalg.inv(g)
    dg = np.empty((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        dg[a] = (np.asarray(chart(x + e)) - np.asarray(chart(x - e))) / (2.0 * step)
    # Gamma^c_ab = 1/2 g^{cd} (g_db,a + g_da,b - g_ab,d)
    sym = np.einsum("adb->dab", dg) + np.einsum("bda->dab", dg) - dg
    return 0.5 * np.einsum("cd,dab->cab", gi, sym)


def _riemann_from_christoffel(chart: Chart, x: np.ndarray, step: float) -> np.ndarray:
    n = x.size
    gamma = coordinate_christoffel(chart, x, step)
    dgamma = np.empty((n, n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        dgamma[a] = (
            coordinate_christoffel(chart, x + e, step)
            - coordinate_christoffel(chart, x - e, step)
        ) / (2.0 * step)
    # R[l, a, b, k]: coefficient of d_l in R(d_a, d_b) d_k (coordinate fields commute)
    quad = np.einsum("lam,mbk->labk", gamma, gamma)
    r = np.einsum("albk->labk", dgamma) - np.einsum("blak->labk", dgamma)
    return r + quad - np.transpose(quad, (0, 2, 1, 3))


def coordinate_riemann(
    chart: Chart, x, step: float = config.ORACLE_STEP, richardson: bool = True
) -> np.ndarray:
    """Curvature tensor R[l, a, b, k] of the chart metric at x, by finite differences."""
    x = np.asarray(x, dtype=float)
    r1 = _riemann_from_christoffel(chart, x, step)
    if not richardson:
        return r1
    # the nested central differences are second order in step, so one
    # extrapolation level removes the h^2 term
    r2 = _riemann_from_christoffel(chart, x, 0.5 * step)
    return (4.0 * r2 - r1) / 3.0


def coordinate_ricci_oracle(
    chart: Chart, x, step: float = config.ORACLE_STEP, richardson: bool = True
) -> np.ndarray:
    """Ricci tensor of the chart metric at x, by finite differences."""
    r = coordinate_riemann(chart, x, step, richardson)
    return np.einsum("llbk->bk", r)


# a few standard charts -----------------------------------------------------


def euclidean_chart(n: int) -> Chart:
    eye = np.eye(n)

    def chart(_x: np.ndarray) -> np.ndarray:
        return eye.copy()

    return chart


def halfplane_chart(scale: float = 1.0) -> Chart:
    """Upper half-plane metric scale*(dx^2 + dy^2)/y^2 (Gauss curvature -1/scale)."""

    def chart(x: np.ndarray) -> np.ndarray:
        y = x[1]
        return (scale / (y * y)) * np.eye(2)

    return chart


def nil3_coframe(point) -> np.ndarray:
    """Rows are the left-invariant coframe at (x, y, z) for the nilpotent class.

    theta^1 = dx + (y dz - z dy)/2, theta^2 = dy, theta^3 = dz.
    """
    _x, y, z = point
    return np.array([[1.0, -0.5 * z, 0.5 * y], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def nil3_chart(a: float, b: float, c: float) -> Chart:
    """Coordinate metric of the nilpotent left-invariant metric diag(a, b, c)."""
    d = np.diag([a, b, c])

    def chart(x: np.ndarray) -> np.ndarray:
        theta = nil3_coframe(x)
        return theta.T @ d @ theta

    return chart


def spd2_chart() -> Chart:
    """Pullback metric of the identity map into unit-determinant SPD 2x2 matrices.

    The target carries <K, K>_G = tr(G^-1 K G^-1 K); the chart is the upper
    half-plane parametrisation G(x, y) = [[1, x], [x, x^2+y^2]] / y.
    """

    def g_of(x: float, y: float) -> np.ndarray:
        return np.array([[1.0, x], [x, x * x + y * y]]) / y

    def chart(p: np.ndarray) -> np.ndarray:
        x, y = p
        g = g_of(x, y)
        gi = np.linalg.inv(g)
        dgx = np.array([[0.0, 1.0], [1.0, 2.0 * x]]) / y
        dgy = np.array([[-1.0, -x], [-x, y * y - x * x]]) / (y * y)
        parts = [dgx, dgy]
        s = np.empty((2, 2))
        for a in range(2):
            for b in range(2):
                s[a, b] = np.trace(gi @ parts[a] @ gi @ parts[b])
        return s

    return chart
