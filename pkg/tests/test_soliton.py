"""Expanding self-similar solutions: residuals, self-similarity, products."""

import dataclasses

import numpy as np
import pytest

from riccilab.algebra import load_catalog
from riccilab.errors import CatalogError, UnsupportedClassError
from riccilab.soliton import (
    lie_derivative_diag,
    product_soliton,
    self_similarity_defect,
    soliton_catalog,
    soliton_ids,
    soliton_residual,
)

TIMES = (0.01, 1.0, 837.0)


@pytest.mark.parametrize("sid", soliton_ids())
def test_catalog_solitons_solve_the_equation(sid):
    """Ric + (1/2) L_V g + g/(2t) vanishes along every stored family."""
    spec = soliton_catalog(sid)
    for t in TIMES:
        rep = soliton_residual(spec, t)
        assert rep.max_abs_residual <= 1e-12
        assert rep.max_abs_flow_defect <= 1e-12


@pytest.mark.parametrize("sid", soliton_ids())
def test_stored_families_are_self_similar(sid):
    spec = soliton_catalog(sid)
    assert self_similarity_defect(spec, 5.0) <= 1e-13


def test_residual_detects_a_wrong_scale():
    spec = soliton_catalog("nil3")
    bad = dataclasses.replace(spec, scale=1.1 * np.asarray(spec.scale))
    assert soliton_residual(bad, 1.0).max_abs_residual > 1e-3


def test_class_to_soliton_links():
    # a few flows limit onto a soliton of a *different* class
    assert soliton_catalog(load_catalog("sl2r")).id == "r_h2"
    assert soliton_catalog(load_catalog("a8")).id == "r_nil3"
    a3 = soliton_catalog(load_catalog("a3", k=3.0))
    assert a3.id == "a2"
    assert a3.params == {"k": 1.0}
    # self-similar classes point at themselves
    assert soliton_catalog(load_catalog("sol3")).id == "sol3"


def test_classes_without_a_limit_are_rejected():
    for cid in ("a5", "a10"):
        with pytest.raises(UnsupportedClassError):
            soliton_catalog(cid)


def test_parameters_must_come_from_the_class():
    with pytest.raises(CatalogError):
        soliton_catalog(load_catalog("a2", k=2.0), k=3.0)


def test_product_of_solitons_is_a_soliton():
    prod = product_soliton(soliton_catalog("nil3"), soliton_catalog("r1"))
    assert prod.nslots == 4
    for t in TIMES:
        assert soliton_residual(prod, t).max_abs_residual <= 1e-12


def test_lie_derivative_of_scaling_field():
    # (L_V g)_ii = -2 w_i g_ii / t for the diagonal similarity field
    w = np.array([2 / 3, 1 / 3, 1 / 3])
    lv = lie_derivative_diag(w, np.array([3.0, 1.0, 1.0]), 2.0)
    np.testing.assert_allclose(np.diag(lv), [-2.0, -1 / 3, -1 / 3], rtol=1e-14)


def test_einstein_family_grows_linearly():
    # negative Einstein metrics expand as 2ct, i.e. weight 0 and scale 2c
    spec = soliton_catalog("h3", c=1.5)
    np.testing.assert_allclose(spec.weights, 0.0)
    np.testing.assert_allclose(spec.coeffs(4.0), 4.0 * spec.coeffs(1.0), rtol=1e-14)
    assert spec.coeffs(1.0)[0] == pytest.approx(3.0)
