"""Lie algebra data for the geometry catalog.

A left-invariant metric on a simply connected Lie group is described by a
fixed frame X_1..X_n of the Lie algebra together with the matrix of inner
products g_ij = <X_i, X_j>.  The algebra itself enters only through its
structure constants

    [X_i, X_j] = sum_k c[k, i, j] X_k,

so everything downstream (connection, curvature, flow) is a function of the
array ``c`` and the metric coefficients.

The catalog collects the homogeneous geometries used by the flow and soliton
modules: the four 3D Milnor classes with non-flat long-time behaviour, the
locally homogeneous Einstein classes (handled analytically), and a family of
4D solvable/nilpotent classes ``a1``..``a10`` plus the limit geometries that
appear as rescaling limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import config
from .errors import CatalogError, ValidationError

__all__ = [
    "StructureConstants",
    "GeometryClass",
    "Asymptote",
    "jacobi_residual",
    "unimodularity_defect",
    "permute_basis",
    "direct_sum",
    "load_catalog",
    "catalog_ids",
]


@dataclass(frozen=True)
class StructureConstants:
    """Structure constants c[k, i, j] of a Lie algebra in a fixed basis."""

    dim: int
    c: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.dim, self.dim, self.dim):
            raise ValidationError(
                f"structure constants must have shape {(self.dim,) * 3}, got {c.shape}"
            )
        if np.max(np.abs(c + np.swapaxes(c, 1, 2))) != 0.0:
            raise ValidationError("structure constants must be antisymmetric in the lower indices")
        object.__setattr__(self, "c", c)

    def bracket(self, i: int, j: int) -> np.ndarray:
        """Coefficient vector of [X_i, X_j]."""
        return self.c[:, i, j].copy()


def jacobi_residual(sc: StructureConstants) -> float:
    """Max-norm of the Jacobi identity applied to all basis triples.

    Zero exactly for a Lie algebra; the catalog uses dyadic rational
    constants, so the float evaluation incurs no rounding at all.
    """
    c = sc.c
    # T[l, i, j, k] = sum_m c[m, i, j] c[l, m, k] encodes [[X_i, X_j], X_k].
    t = np.einsum("mij,lmk->lijk", c, c)
    total = t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))
    return float(np.max(np.abs(total)))


def unimodularity_defect(sc: StructureConstants) -> np.ndarray:
    """Vector of traces tr(ad X_j) = sum_k c[k, k, j].

    All zeros iff the algebra is unimodular (volume preserved by the group).
    """
    return np.einsum("kkj->j", sc.c)


def permute_basis(sc: StructureConstants, perm: tuple[int, ...]) -> StructureConstants:
    """Structure constants in the relabelled basis Y_i = X_perm[i]."""
    p = list(perm)
    if sorted(p) != list(range(sc.dim)):
        raise ValidationError(f"perm must be a permutation of 0..{sc.dim - 1}")
    c = sc.c[np.ix_(p, p, p)]
    return StructureConstants(sc.dim, c)


def direct_sum(a: StructureConstants, b: StructureConstants) -> StructureConstants:
    """Structure constants of the direct sum algebra (block brackets)."""
    n = a.dim + b.dim
    c = np.zeros((n, n, n))
    c[: a.dim, : a.dim, : a.dim] = a.c
    c[a.dim :, a.dim :, a.dim :] = b.c
    return StructureConstants(n, c)


@dataclass(frozen=True)
class Asymptote:
    """Expected long-time behaviour of one metric coefficient: value ~ coefficient * t**exponent.

    ``coefficient`` maps (init, params) to the predicted constant, or returns
    None when the constant is data-dependent with no closed expression (the
    limit is then checked with a Cauchy criterion instead).
    """

    index: int
    exponent: float
    coefficient: Optional[Callable[[np.ndarray, dict], Optional[float]]] = None

    def predicted(self, init: np.ndarray, params: dict) -> Optional[float]:
        if self.coefficient is None:
            return None
        return self.coefficient(np.asarray(init, dtype=float), params)


@dataclass(frozen=True, eq=False)
class GeometryClass:
    """One catalog entry.

    Exactly one of ``algebra`` / ``analytic_ric`` is set.  Lie classes carry
    structure constants and get their curvature from the frame engine.
    Analytic classes (Einstein metrics and products of space forms with flat
    factors) are described per coefficient slot: ``analytic_ric[i]`` is the
    Ricci eigenvalue of the reference metric in slot i (independent of the
    coefficient, since Ricci is scale-invariant) and ``sectional_scale[i]``
    gives max |K| = sectional_scale[i] / coeff[i] for that factor.
    """

    id: str
    dim: int
    ncoeff: int
    algebra: Optional[StructureConstants]
    analytic_ric: Optional[tuple[float, ...]]
    sectional_scale: Optional[tuple[float, ...]]
    default_init: tuple[float, ...]
    params: dict = field(default_factory=dict)
    soliton_id: Optional[str] = None
    soliton_params: dict = field(default_factory=dict)
    asymptotics: Optional[tuple[Asymptote, ...]] = None
    notes: str = ""

    @property
    def is_lie(self) -> bool:
        return self.algebra is not None

    def __repr__(self) -> str:  # keep array noise out of reprs
        return f"GeometryClass(id={self.id!r}, dim={self.dim}, ncoeff={self.ncoeff})"


def _sc(dim: int, entries: dict[tuple[int, int, int], float]) -> StructureConstants:
    """Build structure constants from 1-based entries {(k, i, j): value}.

    Each entry sets c^k_ij = value and the antisymmetric partner.
    """
    c = np.zeros((dim, dim, dim))
    for (k, i, j), v in entries.items():
        c[k - 1, i - 1, j - 1] = v
        c[k - 1, j - 1, i - 1] = -v
    return StructureConstants(dim, c)


def _A(init, _p):
    return float(init[0])


def _B(init, _p):
    return float(init[1])


def _C(init, _p):
    return float(init[2])


def _D(init, _p):
    return float(init[3])


# ---------------------------------------------------------------------------
# catalog builders
# ---------------------------------------------------------------------------


def _flat(id_: str, dim: int) -> GeometryClass:
    return GeometryClass(
        id=id_,
        dim=dim,
        ncoeff=dim,
        algebra=StructureConstants(dim, np.zeros((dim, dim, dim))),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0,) * dim,
        soliton_id=id_,
        asymptotics=tuple(
            Asymptote(i, 0.0, lambda init, _p, i=i: float(init[i])) for i in range(dim)
        ),
        notes="abelian, flat; the flow is stationary",
    )


def _einstein(id_: str, dim: int, sect: float, c: float) -> GeometryClass:
    """Negative Einstein class: Ric(g_ref) = -c g_ref, max|K| = sect*c/coeff."""
    return GeometryClass(
        id=id_,
        dim=dim,
        ncoeff=1,
        algebra=None,
        analytic_ric=(-c,),
        sectional_scale=(sect * c,),
        default_init=(1.0,),
        params={"c": c},
        soliton_id=id_,
        soliton_params={"c": c},
        asymptotics=(Asymptote(0, 1.0, lambda init, p: 2.0 * p["c"]),),
        notes="negative Einstein metric; coefficient grows linearly",
    )


def _sol3() -> GeometryClass:
    return GeometryClass(
        id="sol3",
        dim=3,
        ncoeff=3,
        algebra=_sc(3, {(1, 2, 3): 1.0, (3, 1, 2): -1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0),
        soliton_id="sol3",
        asymptotics=(
            Asymptote(0, 0.0, lambda i, _p: math.sqrt(i[0] * i[2])),
            Asymptote(1, 1.0, lambda i, _p: 4.0),
            Asymptote(2, 0.0, lambda i, _p: math.sqrt(i[0] * i[2])),
        ),
        notes="A*C is conserved; A, C -> sqrt(A0*C0) and B ~ 4t",
    )


def _nil3() -> GeometryClass:
    return GeometryClass(
        id="nil3",
        dim=3,
        ncoeff=3,
        algebra=_sc(3, {(1, 2, 3): -1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0),
        soliton_id="nil3",
        asymptotics=(
            Asymptote(0, -1.0 / 3.0, lambda i, _p: (i[0] ** 2 * i[1] * i[2] / 3.0) ** (1.0 / 3.0)),
            Asymptote(1, 1.0 / 3.0, lambda i, _p: (3.0 * i[0] * i[1] ** 2 / i[2]) ** (1.0 / 3.0)),
            Asymptote(2, 1.0 / 3.0, lambda i, _p: (3.0 * i[0] * i[2] ** 2 / i[1]) ** (1.0 / 3.0)),
        ),
        notes="explicit solution; A^2*B*C is conserved",
    )


def _isom_r2() -> GeometryClass:
    def c_star(i, _p):
        return 0.5 * i[2] * (math.sqrt(i[0] / i[1]) + math.sqrt(i[1] / i[0]))

    return GeometryClass(
        id="isom_r2",
        dim=3,
        ncoeff=3,
        algebra=_sc(3, {(1, 2, 3): 1.0, (2, 3, 1): 1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(4.0, 1.0, 2.0),
        soliton_id="r3",
        asymptotics=(
            Asymptote(0, 0.0, lambda i, _p: math.sqrt(i[0] * i[1])),
            Asymptote(1, 0.0, lambda i, _p: math.sqrt(i[0] * i[1])),
            Asymptote(2, 0.0, c_star),
        ),
        notes="A*B is conserved; converges to a flat metric",
    )


def _sl2r() -> GeometryClass:
    return GeometryClass(
        id="sl2r",
        dim=3,
        ncoeff=3,
        algebra=_sc(3, {(1, 2, 3): -1.0, (2, 3, 1): 1.0, (3, 1, 2): 1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0),
        soliton_id="r_h2",
        asymptotics=(
            Asymptote(0, 0.0, None),  # positive limit, no closed expression
            Asymptote(1, 1.0, lambda i, _p: 2.0),
            Asymptote(2, 1.0, lambda i, _p: 2.0),
        ),
        notes="fiber direction pinches to a positive constant; base opens like 2t",
    )


def _a2(k: float) -> GeometryClass:
    lam = 4.0 * (k * k + k + 1.0)
    return GeometryClass(
        id="a2",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(1, 1, 4): 1.0, (2, 2, 4): k, (3, 3, 4): -(k + 1.0)}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        params={"k": k},
        soliton_id="a2",
        soliton_params={"k": k},
        asymptotics=(
            Asymptote(0, 0.0, _A),
            Asymptote(1, 0.0, _B),
            Asymptote(2, 0.0, _C),
            Asymptote(3, 1.0, lambda i, p, lam=lam: lam),
        ),
        notes="diagonal coefficients frozen except the solvable direction",
    )


def _a3(k: float) -> GeometryClass:
    if k == 0.0:
        raise CatalogError("class a3 requires k != 0")
    return GeometryClass(
        id="a3",
        dim=4,
        ncoeff=4,
        algebra=_sc(
            4, {(1, 1, 4): k, (2, 1, 4): 1.0, (1, 2, 4): -1.0, (2, 2, 4): k, (3, 3, 4): -2.0 * k}
        ),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(2.0, 1.0, 1.0, 1.0),
        params={"k": k},
        soliton_id="a2",
        soliton_params={"k": 1.0},
        asymptotics=(
            Asymptote(0, 0.0, lambda i, _p: math.sqrt(i[0] * i[1])),
            Asymptote(1, 0.0, lambda i, _p: math.sqrt(i[0] * i[1])),
            Asymptote(2, 0.0, _C),
            Asymptote(3, 1.0, lambda i, p: 12.0 * p["k"] ** 2),
        ),
        notes="rotation-coupled solvable class; same limit geometry as a2 with k=1",
    )


def _a5() -> GeometryClass:
    return GeometryClass(
        id="a5",
        dim=4,
        ncoeff=4,
        algebra=_sc(
            4, {(1, 1, 4): -0.5, (2, 1, 4): 1.0, (2, 2, 4): -0.5, (3, 3, 4): 1.0}
        ),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id=None,
        asymptotics=(
            # First two coefficients carry sqrt(log t) factors with a
            # data-dependent constant; only scale-free combinations are
            # predicted: A*B -> const, A/B ~ (2/3) log t, D ~ 3t.
            Asymptote(2, 0.0, _C),
            Asymptote(3, 1.0, lambda i, _p: 3.0),
        ),
        notes="logarithmic corrections; check A*B, A/B and D/t rather than A, B",
    )


def _a6() -> GeometryClass:
    return GeometryClass(
        id="a6",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(2, 1, 4): 1.0, (3, 2, 4): 1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id="a6",
        asymptotics=(
            Asymptote(0, 1.0 / 3.0, lambda i, _p: (3.0 * i[0] ** 2 * i[1] / i[3]) ** (1.0 / 3.0)),
            Asymptote(1, 0.0, lambda i, _p: (i[0] * i[1] * i[2]) ** (1.0 / 3.0)),
            Asymptote(2, -1.0 / 3.0, lambda i, _p: (i[1] * i[2] ** 2 * i[3] / 3.0) ** (1.0 / 3.0)),
            Asymptote(3, 2.0 / 3.0, lambda i, _p: (9.0 * i[2] * i[3] ** 2 / i[0]) ** (1.0 / 3.0)),
        ),
        notes="explicit solution built from two cubic-root factors",
    )


def _a7() -> GeometryClass:
    return GeometryClass(
        id="a7",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(4, 2, 3): 1.0, (2, 3, 1): 1.0, (3, 1, 2): -1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id="a7",
        asymptotics=(
            Asymptote(0, 1.0, lambda i, _p: 4.0),
            Asymptote(1, 1.0 / 3.0, lambda i, _p: (9.0 * i[1] * i[2] * i[3] ** 2) ** (1.0 / 6.0)),
            Asymptote(2, 1.0 / 3.0, lambda i, _p: (9.0 * i[1] * i[2] * i[3] ** 2) ** (1.0 / 6.0)),
            Asymptote(3, -1.0 / 3.0, lambda i, _p: (i[1] * i[2] * i[3] ** 2 / 3.0) ** (1.0 / 3.0)),
        ),
        notes="central direction follows the same closed form as a8",
    )


def _a8() -> GeometryClass:
    return GeometryClass(
        id="a8",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(4, 2, 3): -1.0, (2, 3, 1): 1.0, (3, 1, 2): 1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id="r_nil3",
        asymptotics=(
            # The rotation slot obeys A' = (B-C)^2/(BC) >= 0, so A climbs to a
            # data-dependent limit (it is constant when B0 = C0); there is no
            # closed expression, hence the None coefficient.
            Asymptote(0, 0.0, None),
            Asymptote(1, 1.0 / 3.0, lambda i, _p: (9.0 * i[1] * i[2] * i[3] ** 2) ** (1.0 / 6.0)),
            Asymptote(2, 1.0 / 3.0, lambda i, _p: (9.0 * i[1] * i[2] * i[3] ** 2) ** (1.0 / 6.0)),
            Asymptote(3, -1.0 / 3.0, lambda i, _p: (i[1] * i[2] * i[3] ** 2 / 3.0) ** (1.0 / 3.0)),
        ),
        notes="splits off a line; nilpotent limit geometry",
    )


def _a4() -> GeometryClass:
    return GeometryClass(
        id="a4",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(1, 2, 3): -1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id="a4",
        asymptotics=(
            Asymptote(0, -1.0 / 3.0, lambda i, _p: (i[0] ** 2 * i[1] * i[2] / 3.0) ** (1.0 / 3.0)),
            Asymptote(1, 1.0 / 3.0, lambda i, _p: (3.0 * i[0] * i[1] ** 2 / i[2]) ** (1.0 / 3.0)),
            Asymptote(2, 1.0 / 3.0, lambda i, _p: (3.0 * i[0] * i[2] ** 2 / i[1]) ** (1.0 / 3.0)),
            Asymptote(3, 0.0, _D),
        ),
        notes="nil3 block with a flat line",
    )


def _a9() -> GeometryClass:
    return GeometryClass(
        id="a9",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(1, 2, 3): -1.0, (2, 3, 1): 1.0, (3, 1, 2): 1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id="r2_h2",
        asymptotics=(
            Asymptote(0, 0.0, None),
            Asymptote(1, 1.0, lambda i, _p: 2.0),
            Asymptote(2, 1.0, lambda i, _p: 2.0),
            Asymptote(3, 0.0, _D),
        ),
        notes="sl2r block with a flat line",
    )


def _a10() -> GeometryClass:
    return GeometryClass(
        id="a10",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(1, 2, 3): 1.0, (2, 3, 1): 1.0, (3, 1, 2): 1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id=None,
        asymptotics=None,
        notes="compact block collapses in finite time; runs terminate as degenerate",
    )


def _r_h2() -> GeometryClass:
    # Line times hyperbolic plane, in the 3-slot presentation (1, 2t, 2t).
    return GeometryClass(
        id="r_h2",
        dim=3,
        ncoeff=3,
        algebra=None,
        analytic_ric=(0.0, -1.0, -1.0),
        sectional_scale=(0.0, 1.0, 1.0),
        default_init=(1.0, 2.0, 2.0),
        soliton_id="r_h2",
        asymptotics=(
            Asymptote(0, 0.0, _A),
            Asymptote(1, 1.0, lambda i, _p: 2.0),
            Asymptote(2, 1.0, lambda i, _p: 2.0),
        ),
        notes="flat line plus hyperbolic plane (two identical Einstein slots)",
    )


def _r2_h2() -> GeometryClass:
    return GeometryClass(
        id="r2_h2",
        dim=4,
        ncoeff=4,
        algebra=None,
        analytic_ric=(0.0, -1.0, -1.0, 0.0),
        sectional_scale=(0.0, 1.0, 1.0, 0.0),
        default_init=(1.0, 2.0, 2.0, 1.0),
        soliton_id="r2_h2",
        asymptotics=(
            Asymptote(0, 0.0, _A),
            Asymptote(1, 1.0, lambda i, _p: 2.0),
            Asymptote(2, 1.0, lambda i, _p: 2.0),
            Asymptote(3, 0.0, _D),
        ),
        notes="flat plane plus hyperbolic plane",
    )


def _r_nil3() -> GeometryClass:
    # Line times the 3D nilpotent geometry, frame ordered so the line is
    # slot 1 and the nilpotent center sits in slot 4.
    return GeometryClass(
        id="r_nil3",
        dim=4,
        ncoeff=4,
        algebra=_sc(4, {(4, 2, 3): -1.0}),
        analytic_ric=None,
        sectional_scale=None,
        default_init=(1.0, 1.0, 1.0, 1.0),
        soliton_id="r_nil3",
        asymptotics=(
            Asymptote(0, 0.0, _A),
            Asymptote(1, 1.0 / 3.0, lambda i, _p: (3.0 * i[3] * i[1] ** 2 / i[2]) ** (1.0 / 3.0)),
            Asymptote(2, 1.0 / 3.0, lambda i, _p: (3.0 * i[3] * i[2] ** 2 / i[1]) ** (1.0 / 3.0)),
            Asymptote(3, -1.0 / 3.0, lambda i, _p: (i[3] ** 2 * i[1] * i[2] / 3.0) ** (1.0 / 3.0)),
        ),
        notes="limit geometry of class a8",
    )


_BUILDERS: dict[str, Callable[..., GeometryClass]] = {
    "r1": lambda: _flat("r1", 1),
    "r3": lambda: _flat("r3", 3),
    "a1": lambda: _flat("a1", 4),
    "h2": lambda c=config.EINSTEIN_DEFAULT_C: _einstein("h2", 2, 1.0, c),
    "h3": lambda c=config.EINSTEIN_DEFAULT_C: _einstein("h3", 3, 0.5, c),
    "h4": lambda c=config.EINSTEIN_DEFAULT_C: _einstein("h4", 4, 1.0 / 3.0, c),
    "ch2": lambda c=config.EINSTEIN_DEFAULT_C: _einstein("ch2", 4, 2.0 / 3.0, c),
    "sol3": _sol3,
    "nil3": _nil3,
    "isom_r2": _isom_r2,
    "sl2r": _sl2r,
    "a2": lambda k=config.A2_DEFAULT_K: _a2(k),
    "a3": lambda k=config.A3_DEFAULT_K: _a3(k),
    "a4": _a4,
    "a5": _a5,
    "a6": _a6,
    "a7": _a7,
    "a8": _a8,
    "a9": _a9,
    "a10": _a10,
    "r_h2": _r_h2,
    "r2_h2": _r2_h2,
    "r_nil3": _r_nil3,
}


def catalog_ids() -> list[str]:
    return sorted(_BUILDERS)


def load_catalog(class_id: str, **params: float) -> GeometryClass:
    """Look up a geometry class by id, with optional class parameters.

    Parameters are ``k`` for a2/a3 and ``c`` (Einstein constant, > 0) for
    the Einstein classes.
    """
    key = class_id.lower()
    builder = _BUILDERS.get(key)
    if builder is None:
        raise CatalogError(
            f"unknown geometry class {class_id!r}; valid ids: {', '.join(catalog_ids())}"
        )
    try:
        gc = builder(**params)
    except TypeError:
        raise CatalogError(f"class {key!r} does not accept parameters {sorted(params)}") from None
    if "c" in params and params["c"] <= 0:
        raise CatalogError("Einstein constant c must be positive")
    return gc
