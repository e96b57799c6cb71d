"""Catalog integrity: bracket identities, constructors, parameter handling."""

import numpy as np
import pytest

from riccilab.algebra import (
    StructureConstants,
    catalog_ids,
    direct_sum,
    jacobi_residual,
    load_catalog,
    permute_basis,
    unimodularity_defect,
)
from riccilab.errors import CatalogError, ValidationError

ALL_IDS = catalog_ids()


def test_catalog_lists_every_class():
    assert len(ALL_IDS) == 23
    assert ALL_IDS == sorted(ALL_IDS)
    for cid in ("sol3", "nil3", "isom_r2", "sl2r", "a1", "a10", "r_nil3"):
        assert cid in ALL_IDS


@pytest.mark.parametrize("cid", ALL_IDS)
def test_jacobi_identity_holds(cid):
    gc = load_catalog(cid)
    if gc.algebra is None:
        pytest.skip("class carries no bracket")
    assert jacobi_residual(gc.algebra) == 0.0


@pytest.mark.parametrize("cid", ALL_IDS)
def test_unimodularity(cid):
    # every bracket in the catalog is unimodular: tr(ad_x) = 0 for all x
    gc = load_catalog(cid)
    if gc.algebra is None:
        pytest.skip("class carries no bracket")
    assert np.all(unimodularity_defect(gc.algebra) == 0.0)


def test_structure_constants_must_be_antisymmetric():
    c = np.zeros((3, 3, 3))
    c[0, 1, 2] = 1.0  # missing the antisymmetric partner
    with pytest.raises(ValidationError):
        StructureConstants(3, c)


def test_permute_basis_round_trip():
    sc = load_catalog("sol3").algebra
    perm = (2, 0, 1)
    once = permute_basis(sc, perm)
    assert jacobi_residual(once) == 0.0
    # applying the inverse permutation restores the original tensor
    inv = tuple(np.argsort(perm))
    back = permute_basis(once, inv)
    np.testing.assert_array_equal(back.c, sc.c)


def test_permute_basis_rejects_non_permutation():
    sc = load_catalog("nil3").algebra
    with pytest.raises(ValidationError):
        permute_basis(sc, (0, 0, 1))


def test_direct_sum_blocks():
    a = load_catalog("nil3").algebra
    b = load_catalog("r1").algebra
    s = direct_sum(a, b)
    assert s.dim == 4
    assert jacobi_residual(s) == 0.0
    np.testing.assert_array_equal(s.c[:3, :3, :3], a.c)
    # the appended slot commutes with everything
    assert np.all(s.c[:, 3, :] == 0.0)
    assert np.all(s.c[:, :, 3] == 0.0)
    assert np.all(s.c[3] == 0.0)


def test_unknown_class_rejected():
    with pytest.raises(CatalogError):
        load_catalog("zzz")


def test_parameter_validation():
    with pytest.raises(CatalogError):
        load_catalog("a3", k=0.0)
    with pytest.raises(CatalogError):
        load_catalog("a2", c=1.0)  # a2 takes k, not c
    with pytest.raises(CatalogError):
        load_catalog("h2", c=-1.0)
    gc = load_catalog("a2", k=2.0)
    assert gc.params["k"] == 2.0


def test_asymptote_prediction():
    # sol3 locks its outer slots onto sqrt(A0*C0) while the middle slot grows ~ 4t
    gc = load_catalog("sol3")
    init = np.array([2.0, 1.0, 3.0])
    table = {a.index: a for a in gc.asymptotics}
    assert table[0].exponent == 0.0
    assert table[1].exponent == 1.0
    assert table[0].predicted(init, gc.params) == pytest.approx(np.sqrt(6.0), rel=1e-14)
    assert table[1].predicted(init, gc.params) == pytest.approx(4.0)


def test_default_inits_are_positive():
    for cid in ALL_IDS:
        gc = load_catalog(cid)
        v = np.asarray(gc.default_init, dtype=float)
        assert v.shape == (gc.ncoeff,)
        assert np.all(v > 0.0)
