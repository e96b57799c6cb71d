"""Frame curvature engine against hand-derived values and coordinate oracles."""

import numpy as np
import pytest

from riccilab.algebra import load_catalog
from riccilab.curvature import (
    bianchi_residual,
    connection,
    coordinate_ricci_oracle,
    curvature_report,
    euclidean_chart,
    halfplane_chart,
    max_abs_sectional,
    nil3_chart,
    nil3_coframe,
    ricci,
    scalar_curvature,
    sectional,
    spd2_chart,
)
from riccilab.errors import UnsupportedClassError


def test_nil3_sectional_hand_values():
    # diag(A, B, C) = (2, 3, 5): K_12 = K_31 = A/(4BC), K_23 = -3A/(4BC)
    k = sectional(load_catalog("nil3").algebra, np.diag([2.0, 3.0, 5.0]))
    assert k[0, 1] == pytest.approx(2.0 / 60.0, rel=1e-14)
    assert k[0, 2] == pytest.approx(2.0 / 60.0, rel=1e-14)
    assert k[1, 2] == pytest.approx(-6.0 / 60.0, rel=1e-14)
    np.testing.assert_allclose(k, k.T, atol=0.0)
    assert np.all(np.diag(k) == 0.0)


def test_sol3_sectional_hand_values():
    # ((A-C)^2 - 4C^2, (A-C)^2 - 4A^2, (A+C)^2) / 4ABC at (2, 3, 5)
    k = sectional(load_catalog("sol3").algebra, np.diag([2.0, 3.0, 5.0]))
    assert k[0, 1] == pytest.approx(-91.0 / 120.0, rel=1e-14)
    assert k[1, 2] == pytest.approx(-7.0 / 120.0, rel=1e-14)
    assert k[0, 2] == pytest.approx(49.0 / 120.0, rel=1e-14)


def test_flat_classes_have_zero_curvature():
    # abelian bracket: identically zero
    k = sectional(load_catalog("r3").algebra, np.diag([1.0, 2.0, 3.0]))
    assert np.max(np.abs(k)) == 0.0
    # the plane-isometry class is flat exactly when the two rotating slots agree
    k = sectional(load_catalog("isom_r2").algebra, np.diag([1.7, 1.7, 0.4]))
    assert np.max(np.abs(k)) < 1e-15


def test_ricci_is_scale_invariant():
    """Ric(c*g) = Ric(g) as a bilinear form, which is NOT c * Ric(g)."""
    sc = load_catalog("sol3").algebra
    m = np.diag([1.0, 4.0, 1.0])
    r1 = ricci(sc, m)
    r2 = ricci(sc, 3.0 * m)
    np.testing.assert_allclose(r2, r1, rtol=0.0, atol=1e-15)
    assert np.max(np.abs(r1)) > 0.1  # so the identity above is not vacuous


def test_connection_is_metric_and_torsion_free():
    rng = np.random.default_rng(11)
    for cid in ("sol3", "sl2r", "nil3"):
        sc = load_catalog(cid).algebra
        g = np.diag(np.exp(rng.uniform(-1.0, 1.0, size=3)))
        gam = connection(sc, g)
        # torsion: Gamma^l_ij - Gamma^l_ji = c^l_ij
        torsion = gam - np.transpose(gam, (0, 2, 1)) - sc.c
        assert np.max(np.abs(torsion)) <= 1e-14
        # compatibility: <Gamma_i e_j, e_k> + <e_j, Gamma_i e_k> = 0
        low = np.einsum("lij,lk->ijk", gam, g)
        assert np.max(np.abs(low + np.transpose(low, (0, 2, 1)))) <= 1e-14


def test_first_bianchi_identity():
    rng = np.random.default_rng(12)
    for cid in ("sol3", "nil3", "sl2r", "a6", "a7"):
        gc = load_catalog(cid)
        v = np.exp(rng.uniform(-1.0, 1.0, size=gc.ncoeff))
        assert bianchi_residual(gc.algebra, np.diag(v)) <= 1e-13


def test_scalar_curvature_traces_ricci():
    gc = load_catalog("sl2r")
    m = np.diag([1.0, 2.0, 0.5])
    s = scalar_curvature(gc.algebra, m)
    tr = float(np.trace(np.linalg.solve(m, ricci(gc.algebra, m))))
    assert s == pytest.approx(tr, rel=1e-14)
    # nil3 at the unit metric: 2 * (1/4 - 3/4 + 1/4) = -1/2
    s0 = scalar_curvature(load_catalog("nil3").algebra, np.eye(3))
    assert s0 == pytest.approx(-0.5, rel=1e-14)


def test_curvature_report_round_trip():
    gc = load_catalog("nil3")
    rep = curvature_report(gc, np.diag([1.0, 1.0, 1.0]))
    assert rep.scalar == pytest.approx(-0.5)
    assert rep.sectional[1, 2] == pytest.approx(-0.75)
    d = rep.as_dict()
    assert d["class"] == "nil3"
    assert d["bianchi_residual"] <= 1e-14
    np.testing.assert_allclose(np.array(d["sectional"]), rep.sectional)


def test_curvature_report_requires_a_bracket():
    with pytest.raises(UnsupportedClassError):
        curvature_report(load_catalog("h2"), np.diag([1.0]))


def test_max_abs_sectional_handles_both_kinds():
    assert max_abs_sectional(load_catalog("nil3"), [1.0, 1.0, 1.0]) == pytest.approx(0.75)
    # analytic classes use their recorded per-factor curvature scale
    h2 = max_abs_sectional(load_catalog("h2"), [2.0])
    assert h2 > 0.0
    assert max_abs_sectional(load_catalog("h2"), [4.0]) == pytest.approx(h2 / 2.0)


# --- coordinate finite-difference oracle ------------------------------------


def test_euclidean_chart_is_flat():
    ric = coordinate_ricci_oracle(euclidean_chart(3), np.zeros(3))
    assert np.max(np.abs(ric)) == 0.0


@pytest.mark.parametrize("scale", [1.0, 2.5])
def test_halfplane_is_einstein(scale):
    # Gauss curvature -1/scale, so Ric = -(1/scale) * g
    x = np.array([0.3, 1.7])
    g = halfplane_chart(scale)(x)
    ric = coordinate_ricci_oracle(halfplane_chart(scale), x)
    np.testing.assert_allclose(ric, -g / scale, atol=1e-8)


def test_spd2_chart_is_einstein():
    # unit-determinant SPD plane with the trace metric: Ric = -g/2
    ch = spd2_chart()
    for p in (np.array([0.2, 0.9]), np.array([-0.5, 1.4])):
        ric = coordinate_ricci_oracle(ch, p)
        np.testing.assert_allclose(ric, -0.5 * ch(p), atol=1e-7)


def test_frame_ricci_matches_coordinate_oracle():
    """Push the frame Ricci through the coframe and compare with finite differences."""
    a, b, c = 1.3, 0.7, 2.1
    pt = np.array([0.4, -0.3, 0.8])
    ric_frame = ricci(load_catalog("nil3").algebra, np.diag([a, b, c]))
    theta = nil3_coframe(pt)
    ric_coord = coordinate_ricci_oracle(nil3_chart(a, b, c), pt)
    np.testing.assert_allclose(ric_coord, theta.T @ ric_frame @ theta, atol=1e-7)
