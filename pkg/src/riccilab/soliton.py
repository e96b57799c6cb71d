"""Expanding solitons presented as explicitly self-similar diagonal flows.

Each catalog soliton is stored by its coframe scaling weights w_i and its
slice at t = 1:

    g_i(t) = t**(1 - 2 w_i) * g_i(1),

which solves the flow and satisfies

    Ric + (1/2) L_V g + g / (2t) = 0

for a vector field V(t) = V(1)/t whose Lie derivative acts diagonally as
(L_{V(t)} g)_ii = -2 w_i g_ii / t.  ``soliton_residual`` evaluates the
left-hand side of that equation directly -- the curvature comes from the
frame engine or the per-slot Einstein data, never from the stored weights --
so a zero residual is an actual check and not an identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import config
from .algebra import GeometryClass, load_catalog
from .curvature import ricci
from .errors import CatalogError, UnsupportedClassError, ValidationError

__all__ = [
    "SolitonSpec",
    "ResidualReport",
    "soliton_catalog",
    "soliton_ids",
    "product_soliton",
    "lie_derivative_diag",
    "soliton_residual",
    "self_similarity_defect",
]


@dataclass(frozen=True)
class SolitonSpec:
    """Coefficient functions g_i(t) plus the coframe scaling weights w_i.

    ``scale`` is the slice at t = 1.  By default the coefficient functions
    are the self-similar power laws scale_i * t**(1 - 2 weights_i); passing
    ``coeff_fn`` overrides them (used to exercise the self-similarity checker
    on data that is *not* self-similar).
    """

    id: str
    weights: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    ric_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: dict = field(default_factory=dict, repr=False)
    coeff_fn: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        s = np.asarray(self.scale, dtype=float)
        if w.shape != s.shape or w.ndim != 1:
            raise ValidationError("weights and scale must be vectors of equal length")
        if np.min(s) <= 0.0:
            raise ValidationError("soliton coefficients must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scale", s)

    @property
    def nslots(self) -> int:
        return self.weights.size

    def coeffs(self, t: float) -> np.ndarray:
        if t <= 0.0:
            raise ValidationError("soliton slices exist for t > 0 only")
        if self.coeff_fn is not None:
            return np.asarray(self.coeff_fn(t), dtype=float)
        return self.scale * t ** (1.0 - 2.0 * self.weights)

    def coeff_dot(self, t: float) -> np.ndarray:
        if self.coeff_fn is not None:
            h = 1e-4 * t
            stencil = (
                -self.coeffs(t + 2 * h)
                + 8.0 * self.coeffs(t + h)
                - 8.0 * self.coeffs(t - h)
                + self.coeffs(t - 2 * h)
            )
            return stencil / (12.0 * h)
        return (1.0 - 2.0 * self.weights) * self.scale * t ** (-2.0 * self.weights)

    def __repr__(self) -> str:
        return f"SolitonSpec(id={self.id!r}, nslots={self.nslots})"


def _ric_fn_of(gc: GeometryClass) -> Callable[[np.ndarray], np.ndarray]:
    if gc.is_lie:
        sc = gc.algebra
        return lambda v: ricci(sc, np.diag(v))
    r = np.asarray(gc.analytic_ric, dtype=float)
    return lambda _v: np.diag(r)


_THIRD = 1.0 / 3.0
_CBRT3 = 3.0 ** _THIRD

# soliton id -> (weights, coefficients at t=1)
_TABLE: dict[str, tuple[tuple[float, ...], tuple[float, ...]]] = {
    "sol3": ((0.5, 0.0, 0.5), (1.0, 4.0, 1.0)),
    "nil3": ((2 * _THIRD, _THIRD, _THIRD), (_THIRD, 1.0, 1.0)),
    "a4": ((2 * _THIRD, _THIRD, _THIRD, 0.5), (_THIRD, 1.0, 1.0, 1.0)),
    "a6": ((_THIRD, 0.5, 2 * _THIRD, 1.0 / 6.0), (_CBRT3, 1.0, 1.0 / _CBRT3, _CBRT3**2)),
    "a7": ((0.0, _THIRD, _THIRD, 2 * _THIRD), (4.0, _CBRT3, _CBRT3, 1.0 / _CBRT3)),
    "r_nil3": ((0.5, _THIRD, _THIRD, 2 * _THIRD), (1.0, _CBRT3, _CBRT3, 1.0 / _CBRT3)),
    "r_h2": ((0.5, 0.0, 0.0), (1.0, 2.0, 2.0)),
    "r2_h2": ((0.5, 0.0, 0.0, 0.5), (1.0, 2.0, 2.0, 1.0)),
    "r1": ((0.5,), (1.0,)),
    "r3": ((0.5,) * 3, (1.0,) * 3),
    "a1": ((0.5,) * 4, (1.0,) * 4),
}


def soliton_ids() -> list[str]:
    return sorted([*_TABLE, "a2", "h2", "h3", "h4", "ch2"])


def soliton_catalog(which: Union[GeometryClass, str], **params: float) -> SolitonSpec:
    """The catalog soliton of a geometry class (or by soliton id directly).

    Passing a GeometryClass follows its recorded soliton link (e.g. the sl2r
    flow contracts onto the r_h2 soliton); classes without a soliton limit
    raise.  ``a2`` takes the parameter k, the Einstein ids take c.
    """
    if isinstance(which, GeometryClass):
        if which.soliton_id is None:
            raise UnsupportedClassError(f"class {which.id!r} has no catalog soliton")
        if params:
            raise CatalogError("parameters come from the class when passing a GeometryClass")
        return soliton_catalog(which.soliton_id, **which.soliton_params)
    sid = which.lower()
    if sid == "a2":
        k = float(params.pop("k", config.A2_DEFAULT_K))
        if params:
            raise CatalogError(f"unknown soliton parameters {sorted(params)} for {sid!r}")
        return SolitonSpec(
            id="a2",
            weights=np.array([0.5, 0.5, 0.5, 0.0]),
            scale=np.array([1.0, 1.0, 1.0, 4.0 * (k * k + k + 1.0)]),
            ric_fn=_ric_fn_of(load_catalog("a2", k=k)),
            params={"k": k},
        )
    if sid in ("h2", "h3", "h4", "ch2"):
        c = float(params.pop("c", config.EINSTEIN_DEFAULT_C))
        if params:
            raise CatalogError(f"unknown soliton parameters {sorted(params)} for {sid!r}")
        return SolitonSpec(
            id=sid,
            weights=np.zeros(1),
            scale=np.array([2.0 * c]),
            ric_fn=_ric_fn_of(load_catalog(sid, c=c)),
            params={"c": c},
        )
    if sid not in _TABLE:
        raise UnsupportedClassError(f"no catalog soliton named {which!r}")
    if params:
        raise CatalogError(f"soliton {sid!r} takes no parameters, got {sorted(params)}")
    w, s = _TABLE[sid]
    return SolitonSpec(
        id=sid,
        weights=np.array(w),
        scale=np.array(s),
        ric_fn=_ric_fn_of(load_catalog(sid)),
    )


def product_soliton(a: SolitonSpec, b: SolitonSpec) -> SolitonSpec:
    """Product metric of two solitons (curvature splits block-diagonally)."""
    na = a.nslots

    def ric_fn(v: np.ndarray) -> np.ndarray:
        out = np.zeros((v.size, v.size))
        out[:na, :na] = a.ric_fn(v[:na])
        out[na:, na:] = b.ric_fn(v[na:])
        return out

    return SolitonSpec(
        id=f"{a.id}*{b.id}",
        weights=np.concatenate([a.weights, b.weights]),
        scale=np.concatenate([a.scale, b.scale]),
        ric_fn=ric_fn,
    )


def lie_derivative_diag(weights, metric, t: float) -> np.ndarray:
    """(L_{V(t)} g)_ij = diag(-2 w_i g_ii / t) for the diagonal scaling field.

    ``metric`` may be a diagonal matrix or the vector of its diagonal.
    """
    if t <= 0.0:
        raise ValidationError("t must be positive")
    w = np.asarray(weights, dtype=float)
    m = np.asarray(metric, dtype=float)
    if m.ndim == 2:
        if np.count_nonzero(m - np.diag(np.diagonal(m))):
            raise UnsupportedClassError("only diagonal scaling fields are supported")
        m = np.diagonal(m).copy()
    if m.shape != w.shape:
        raise ValidationError("weights and metric diagonal must have equal length")
    return np.diag(-2.0 * w * m / t)


@dataclass(frozen=True)
class ResidualReport:
    soliton_id: str
    t: float
    residual: np.ndarray
    flow_defect: np.ndarray

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def max_abs_flow_defect(self) -> float:
        return float(np.max(np.abs(self.flow_defect)))

    def as_dict(self) -> dict:
        return {
            "soliton": self.soliton_id,
            "t": self.t,
            "residual": self.residual.tolist(),
            "max_abs_residual": self.max_abs_residual,
            "flow_defect": self.flow_defect.tolist(),
            "max_abs_flow_defect": self.max_abs_flow_defect,
        }


def soliton_residual(spec: SolitonSpec, t: float) -> ResidualReport:
    """Ric + (1/2) L_V g + g/(2t) on the t-slice, as a full matrix.

    Also reports the plain flow defect d/dt g + 2 Ric of the stored family
    (the two vanish together on a soliton, but are assembled differently).
    """
    g = spec.coeffs(t)
    ric = np.asarray(spec.ric_fn(g), dtype=float)
    residual = ric + 0.5 * lie_derivative_diag(spec.weights, g, t) + np.diag(g) / (2.0 * t)
    defect = spec.coeff_dot(t) + 2.0 * np.diagonal(ric)
    return ResidualReport(spec.id, float(t), residual, defect)


def self_similarity_defect(spec: SolitonSpec, t: float) -> float:
    """Relative mismatch of g(t) against t**(1-2w) * g(1), per slot, max'd.

    Zero for the catalog power-law presentations; nonzero for coefficient
    functions that are not self-similar with the stored weights.
    """
    left = spec.coeffs(t)
    right = float(t) ** (1.0 - 2.0 * spec.weights) * spec.coeffs(1.0)
    return float(np.max(np.abs(left - right) / np.abs(left)))
