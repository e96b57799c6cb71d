"""Twisted torus-bundle flow: geometry helpers, monitors, and the integrator."""

import numpy as np
import pytest

from riccilab.bundle import (
    BundleState,
    bundle_curvature,
    bundle_flow,
    constant_state,
    det_drift,
    energy,
    fourier_state,
    gauge_transform,
    geodesic_generator,
    geodesic_samplers,
    geodesic_state,
    harmonic_residual_norm,
    identity_map_check,
    sym_space_exp,
    sym_space_metric,
    v_tilde,
)
from riccilab.errors import ConfigurationError, ValidationError

RHO = np.array([[2.0, 1.0], [1.0, 1.0]])


def grid(m):
    return np.arange(m) * (2.0 * np.pi / m)


# --- symmetric-space helpers -------------------------------------------------


def test_sym_space_exp_hand_value():
    s = 0.8
    e = sym_space_exp(np.array([[0.0, s], [s, 0.0]]))
    expected = np.array([[np.cosh(s), np.sinh(s)], [np.sinh(s), np.cosh(s)]])
    np.testing.assert_allclose(e, expected, atol=1e-14)
    assert np.linalg.det(e) == pytest.approx(1.0, abs=1e-14)


def test_sym_space_exp_validates_direction():
    with pytest.raises(ValidationError):
        sym_space_exp(np.array([[0.0, 1.0], [0.5, 0.0]]))  # not symmetric
    with pytest.raises(ValidationError):
        sym_space_exp(np.eye(2))  # not traceless


def test_sym_space_metric_is_conjugation_invariant():
    rng = np.random.default_rng(31)
    g = sym_space_exp(np.array([[0.3, 0.1], [0.1, -0.3]]))
    k = np.array([[0.7, -0.2], [-0.2, -0.7]])
    base = sym_space_metric(g, k)
    for _ in range(5):
        a = rng.normal(size=(2, 2))
        a /= np.sqrt(abs(np.linalg.det(a)))
        moved = sym_space_metric(a @ g @ a.T, a @ k @ a.T)
        assert moved == pytest.approx(base, rel=1e-9)


def test_geodesic_generator_is_a_logarithm():
    # for a symmetric positive-definite twist, exp(X/2) recovers the twist itself
    x = geodesic_generator(RHO)
    np.testing.assert_allclose(sym_space_exp(x, 0.5), RHO, atol=1e-12)
    assert np.trace(x) == pytest.approx(0.0, abs=1e-14)


def test_geodesic_closes_up_to_holonomy():
    samp = geodesic_samplers(geodesic_generator(RHO))
    lhs = samp.G(1.3 + 2.0 * np.pi)
    rhs = RHO @ samp.G(1.3) @ RHO.T
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_geodesic_energy_identity():
    # with unit base metric the map energy is Tr(X^2) / (4 pi)
    x = geodesic_generator(RHO)
    samp = geodesic_samplers(x)
    alpha = grid(64)
    g_field = np.array([samp.G(a) for a in alpha])
    state = BundleState(np.ones(64), g_field, RHO, 1.0)
    assert energy(state) == pytest.approx(np.trace(x @ x) / (4.0 * np.pi), rel=1e-6)


# --- states and monitors -----------------------------------------------------


def test_state_validation():
    with pytest.raises(ValidationError):
        BundleState(np.ones(16), np.tile(np.eye(2), (8, 1, 1)), RHO, 1.0)
    with pytest.raises(ValidationError):
        BundleState(np.ones(16), np.tile(np.eye(2), (16, 1, 1)), RHO, -1.0)
    with pytest.raises(ValidationError):
        BundleState(-np.ones(16), np.tile(np.eye(2), (16, 1, 1)), RHO, 1.0)


def test_grid_must_resolve_the_stencil():
    with pytest.raises(ConfigurationError):
        geodesic_state(4, RHO)


def test_twist_must_be_symmetric_unimodular():
    with pytest.raises(ValidationError):
        fourier_state(16, rho=np.array([[0.0, 1.0], [-1.0, 0.0]]))
    with pytest.raises(ValidationError):
        fourier_state(16, rho=2.0 * np.eye(2))


def test_monitors_are_gauge_invariant():
    state = fourier_state(24, RHO)
    a = np.array([[1.2, 0.3], [-0.4, 1.1]])
    a /= np.sqrt(np.linalg.det(a))
    moved = gauge_transform(state, a)
    np.testing.assert_allclose(
        harmonic_residual_norm(moved), harmonic_residual_norm(state), rtol=1e-9
    )
    assert energy(moved) == pytest.approx(energy(state), rel=1e-12)
    assert v_tilde(moved) == pytest.approx(v_tilde(state), rel=1e-12)


def test_gauge_matrix_must_be_unimodular():
    with pytest.raises(ValidationError):
        gauge_transform(fourier_state(16, RHO), 2.0 * np.eye(2))


def test_det_drift_measures_unimodularity():
    assert det_drift(np.eye(2)) == 0.0
    assert det_drift(1.1 * np.eye(2)) == pytest.approx(0.21)


def test_trace_identity_on_analytic_samplers():
    samp = geodesic_samplers(geodesic_generator(RHO))
    curv = bundle_curvature(samp, np.linspace(0.0, 2.0 * np.pi, 9))
    assert np.max(np.abs(curv.trace_identity_residual)) <= 1e-12
    assert curv.ricci_consistency <= 1e-12


def test_trace_identity_grid_route_refines_at_fourth_order():
    r32 = np.max(np.abs(bundle_curvature(geodesic_state(32, RHO)).trace_identity_residual))
    r64 = np.max(np.abs(bundle_curvature(geodesic_state(64, RHO)).trace_identity_residual))
    assert r32 <= 1e-5
    assert r32 / r64 > 12.0  # ~16 for a 4th-order stencil


def test_harmonic_residual_flags_nonharmonic_data():
    # the geodesic is exactly harmonic, so only stencil truncation remains
    r32 = np.max(harmonic_residual_norm(geodesic_state(32, RHO)))
    r64 = np.max(harmonic_residual_norm(geodesic_state(64, RHO)))
    assert r32 <= 1e-5
    assert r32 / r64 > 12.0
    assert np.max(harmonic_residual_norm(fourier_state(32, RHO))) > 1e-2


def test_identity_map_reference_solution():
    report = identity_map_check()
    assert report["lambda"] == pytest.approx(-0.5, abs=1e-8)
    assert report["a"] == pytest.approx(1.5, abs=1e-8)
    assert report["max_residual"] <= 1e-8


# --- the flow itself ---------------------------------------------------------


def test_constant_state_is_stationary():
    state = constant_state(16)
    traj = bundle_flow(state, 1.3, use_numba=False)
    final = traj.final_state
    np.testing.assert_array_equal(final.g_base, state.g_base)
    np.testing.assert_array_equal(final.G, state.G)
    assert traj.energies[-1] == 0.0
    assert traj.terminated_reason is None


def test_compiled_and_reference_integrators_agree():
    state = fourier_state(16, RHO)
    fast = bundle_flow(state, 1.05, use_numba=True)
    slow = bundle_flow(state, 1.05, use_numba=False)
    assert fast.steps == slow.steps
    np.testing.assert_allclose(fast.final_state.g_base, slow.final_state.g_base, atol=1e-12)
    np.testing.assert_allclose(fast.final_state.G, slow.final_state.G, atol=1e-12)


def test_flow_dissipates_and_keeps_the_gauge():
    traj = bundle_flow(fourier_state(32, RHO), 2.0)
    assert traj.terminated_reason is None
    assert traj.v_tilde_increase_max <= 1e-10  # normalized volume never grows
    assert max(traj.det_drifts) <= 1e-5
    assert traj.max_harmonic[-1] < 1e-2 * traj.max_harmonic[0]


def test_geodesic_state_rides_the_similarity_solution():
    traj = bundle_flow(geodesic_state(48, RHO), 20.0)
    v = np.asarray(traj.v_tildes)
    assert np.max(np.abs(v - v[0])) <= 1e-10
    assert np.max(traj.max_einstein) <= 1e-10
    # energy decays with the similarity exponent -1/2
    ratio = traj.energies[-1] / traj.energies[0]
    assert ratio == pytest.approx((traj.times[0] / traj.times[-1]) ** 0.5, rel=1e-12)


def test_fixed_base_mode_freezes_the_base():
    state = fourier_state(16, RHO)
    traj = bundle_flow(state, 1.5, fixed_base=True)
    np.testing.assert_array_equal(traj.final_state.g_base, state.g_base)
    assert np.max(np.abs(traj.final_state.G - state.G)) > 1e-6
