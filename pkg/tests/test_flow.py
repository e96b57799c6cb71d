"""Coefficient ODE integration, closed forms, and the type-III monitor."""

import numpy as np
import pytest

from riccilab.algebra import load_catalog
from riccilab.errors import UnsupportedClassError, ValidationError
from riccilab.flow import (
    TABULATED_CLASSES,
    FlowProblem,
    closed_form,
    integrate,
    rhs,
    rhs_from_ricci,
    tabulated_rhs,
    type_iii_sup,
)


def test_rhs_is_scale_invariant():
    # -2 Ric does not move when the metric is scaled, so neither does the RHS
    gc = load_catalog("sol3")
    v = np.array([2.0, 1.0, 3.0])
    np.testing.assert_allclose(rhs(gc, 5.0 * v), rhs(gc, v), atol=1e-15)


@pytest.mark.parametrize("cid", TABULATED_CLASSES)
def test_transcribed_rhs_agrees_with_engine(cid):
    gc = load_catalog(cid)
    rng = np.random.default_rng(21)
    for _ in range(5):
        v = np.exp(rng.uniform(-1.5, 1.5, size=gc.ncoeff))
        a = rhs_from_ricci(gc, v)
        b = tabulated_rhs(gc, v)
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(b)))


def test_nil3_closed_form_hand_values():
    # u = 1 + 3 A0 t / (B0 C0); A = A0 u^(-1/3), B and C grow like u^(1/3)
    init = np.array([2.0, 3.0, 5.0])
    cf = closed_form(load_catalog("nil3"), init, np.array([0.0, 10.0]))
    assert np.all(cf.exact_mask)
    np.testing.assert_allclose(cf.values[0], init, rtol=1e-15)
    u = 1.0 + 3.0 * 2.0 * 10.0 / 15.0
    np.testing.assert_allclose(
        cf.values[1], [2.0 * u ** (-1 / 3), 3.0 * u ** (1 / 3), 5.0 * u ** (1 / 3)], rtol=1e-14
    )


def test_a2_closed_form_quartic_slot():
    cf = closed_form(load_catalog("a2", k=2.0), np.ones(4), np.array([3.0]))
    assert np.all(cf.exact_mask)
    np.testing.assert_allclose(cf.values[0], [1.0, 1.0, 1.0, 85.0], rtol=1e-14)


def test_partial_closed_forms_flag_their_slots():
    cf = closed_form(load_catalog("a7"), np.ones(4), np.array([1.0]))
    assert list(cf.exact_mask) == [False, False, False, True]
    assert np.all(np.isnan(cf.values[0, :3]))
    assert np.isfinite(cf.values[0, 3])


def test_einstein_class_shrinks_linearly():
    cf = closed_form(load_catalog("h2", c=2.0), np.array([3.0]), np.array([0.5, 1.0]))
    np.testing.assert_allclose(cf.values[:, 0], [5.0, 7.0], rtol=1e-15)


def test_flat_closed_form_is_constant():
    cf = closed_form(load_catalog("r3"), np.array([1.5, 2.5, 0.5]), np.array([7.0]))
    np.testing.assert_allclose(cf.values[0], [1.5, 2.5, 0.5], rtol=0.0)


def test_closed_form_unavailable_for_sol3():
    with pytest.raises(UnsupportedClassError):
        closed_form(load_catalog("sol3"), np.ones(3), [1.0])


def test_integration_tracks_closed_form():
    gc = load_catalog("nil3")
    init = np.array([1.0, 1.0, 1.0])
    traj = integrate(FlowProblem(gc, init, t0=1e-3, t1=50.0))
    cf = closed_form(gc, init, traj.times - traj.times[0])
    rel = np.abs(traj.coeffs - cf.values) / np.abs(cf.values)
    assert np.max(rel) <= 1e-7
    assert traj.terminated_reason == "completed"


def test_dense_output_matches_samples():
    traj = integrate(FlowProblem(load_catalog("sol3"), np.array([2.0, 1.0, 3.0]), t0=1.0, t1=20.0))
    for i in (0, len(traj.times) // 2, -1):
        np.testing.assert_allclose(traj.coeff_fn(traj.times[i]), traj.coeffs[i], rtol=1e-9)
    with pytest.raises(ValidationError):
        traj.coeff_fn(0.5)


def test_sample_grid_is_logarithmic():
    traj = integrate(FlowProblem(load_catalog("nil3"), np.ones(3), t0=0.01, t1=100.0))
    assert traj.times[0] == 0.01
    assert traj.times[-1] == 100.0
    ratios = traj.times[1:] / traj.times[:-1]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)


def test_degenerating_class_stops_early():
    gc = load_catalog("a10")
    traj = integrate(FlowProblem(gc, gc.default_init, t0=1e-3, t1=100.0))
    assert traj.terminated_reason == "degenerate"
    assert traj.times[-1] < 100.0


def test_type_iii_monitor_stays_bounded():
    from riccilab.curvature import tabulated_sectional

    traj = integrate(FlowProblem(load_catalog("nil3"), np.ones(3), t0=1e-3, t1=1e3))
    sup = type_iii_sup(traj)
    assert 0.2 <= sup <= 0.3  # the rescaled curvature settles near 1/4
    i = len(traj.times) // 2
    expected = float(np.max(np.abs(tabulated_sectional("nil3", traj.coeffs[i]))))
    assert traj.max_k[i] == pytest.approx(expected, rel=1e-12)


def test_problem_validation():
    gc = load_catalog("nil3")
    with pytest.raises(ValidationError):
        FlowProblem(gc, np.ones(3), method="rk99")
    with pytest.raises(ValidationError):
        FlowProblem(gc, np.ones(3), rtol=-1.0)
    with pytest.raises(ValidationError):
        FlowProblem(gc, np.ones(3), t0=5.0, t1=1.0)
    with pytest.raises(ValidationError):
        FlowProblem(gc, np.array([1.0, -1.0, 1.0]))
    with pytest.raises(ValidationError):
        FlowProblem(gc, np.ones(4))
