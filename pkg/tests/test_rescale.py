"""Parabolic rescaling, power-law fits, and convergence bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riccilab.algebra import load_catalog
from riccilab.errors import ValidationError
from riccilab.flow import FlowProblem, integrate
from riccilab.rescale import (
    NormalizerSpec,
    compose_normalizers,
    fit_power_law,
    identity_normalizer,
    limit_extrapolate,
    normalizer_for,
    rescaled_trajectory,
    soliton_deviation,
    soliton_normalizer,
    soliton_trajectory,
)
from riccilab.soliton import soliton_catalog


def test_fit_recovers_exact_power_law():
    ts = np.geomspace(1.0, 1e4, 120)
    fit = fit_power_law(ts, 5.0 * ts**2)
    assert fit.model == "pure-power"
    assert abs(fit.exponent - 2.0) <= 1e-10
    assert abs(fit.coefficient - 5.0) <= 1e-9
    assert fit.residual <= 1e-12


@settings(max_examples=30, deadline=None)
@given(
    p=st.floats(min_value=-2.0, max_value=2.0),
    c=st.floats(min_value=0.1, max_value=10.0),
)
def test_fit_recovery_property(p, c):
    ts = np.geomspace(10.0, 1e5, 80)
    fit = fit_power_law(ts, c * ts**p)
    assert abs(fit.exponent - p) <= 1e-8
    assert abs(fit.coefficient - c) <= 1e-6 * c


def test_fit_selects_logarithmic_correction():
    ts = np.geomspace(1e2, 1e6, 200)
    fit = fit_power_law(ts, 2.5 * ts**1.5 * np.sqrt(np.log(ts)))
    assert fit.model == "log-corrected"
    assert fit.log_exponent == pytest.approx(0.5)
    assert fit.exponent == pytest.approx(1.5, abs=1e-8)
    assert fit.coefficient == pytest.approx(2.5, rel=1e-8)


def test_fit_window_restricts_the_samples():
    ts = np.geomspace(1.0, 1e4, 200)
    vals = 3.0 * ts.copy()
    vals[ts < 1e2] += 50.0  # corrupt the head; the tail window must ignore it
    fit = fit_power_law(ts, vals, window=0.25)  # fit on the last quarter of the log span
    assert fit.exponent == pytest.approx(1.0, abs=1e-10)
    assert fit.coefficient == pytest.approx(3.0, rel=1e-10)
    with pytest.raises(ValidationError):
        fit_power_law(ts, vals, window=1.5)


def test_limit_extrapolation_beats_the_raw_tail():
    gc = load_catalog("sol3")
    init = np.array([2.0, 1.0, 3.0])
    traj = integrate(FlowProblem(gc, init, t0=1.0, t1=1e4, rtol=1e-12, atol=1e-14))
    target = np.sqrt(6.0)  # the conserved product pins the locked value
    raw = abs(traj.coeffs[-1, 0] - target)
    ext = abs(limit_extrapolate(traj, 0) - target)
    assert ext <= 1e-8
    assert ext < raw / 100.0


def test_normalizer_from_soliton_link():
    # with unit data the nilpotent flow runs A ~ (3t)^(-1/3), B, C ~ (3t)^(1/3),
    # while the soliton family is (t^(-1/3)/3, t^(1/3), t^(1/3))
    norm = normalizer_for(load_catalog("nil3"), np.ones(3))
    np.testing.assert_allclose(norm.exponents, [4 / 3, 2 / 3, 2 / 3], rtol=1e-12)
    np.testing.assert_allclose(
        norm.constants, [3.0 ** (-2 / 3), 3.0 ** (-1 / 3), 3.0 ** (-1 / 3)], rtol=1e-6
    )


def test_soliton_normalizer_uses_doubled_weights():
    spec = soliton_catalog("sol3")
    norm = soliton_normalizer(spec)
    np.testing.assert_allclose(norm.exponents, 2.0 * np.asarray(spec.weights))
    np.testing.assert_allclose(norm.constants, 1.0)


def test_rescaling_by_composed_factors_matches_single_step():
    gc = load_catalog("nil3")
    traj = integrate(FlowProblem(gc, np.ones(3), t0=1.0, t1=2100.0))
    u = soliton_normalizer(soliton_catalog(gc))
    k = NormalizerSpec(u.exponents, np.array([0.7, 1.3, 2.1]))
    step1 = rescaled_trajectory(traj, 10.0, u, window=(99.0, 201.0))
    twice = rescaled_trajectory(step1, 100.0, k, window=(1.0, 2.0))
    once = rescaled_trajectory(traj, 1000.0, compose_normalizers(u, k), window=(1.0, 2.0))
    np.testing.assert_allclose(twice.coeffs, once.coeffs, atol=1e-10)
    np.testing.assert_allclose(twice.times, once.times, atol=0.0)


def test_compose_requires_matching_exponents():
    a = NormalizerSpec(np.array([1.0, 0.0, 1.0]), np.ones(3))
    b = NormalizerSpec(np.array([0.5, 0.0, 1.0]), np.ones(3))
    with pytest.raises(ValidationError):
        compose_normalizers(a, b)


def test_identity_normalizer_is_neutral():
    gc = load_catalog("sol3")
    traj = integrate(FlowProblem(gc, np.array([2.0, 1.0, 3.0]), t0=1.0, t1=10.0))
    resc = rescaled_trajectory(traj, 1.0, identity_normalizer(3), window=(2.0, 4.0))
    for t, v in zip(resc.times, resc.coeffs):
        np.testing.assert_allclose(v, traj.coeff_fn(t), rtol=1e-9)


def test_rescaled_window_must_be_covered():
    gc = load_catalog("nil3")
    traj = integrate(FlowProblem(gc, np.ones(3), t0=1.0, t1=100.0))
    norm = soliton_normalizer(soliton_catalog(gc))
    with pytest.raises(ValidationError):
        rescaled_trajectory(traj, 1e6, norm)


def test_deviation_vanishes_on_the_soliton_itself():
    spec = soliton_catalog("nil3")
    traj = soliton_trajectory(spec, 1.0, 1e5)
    dev = soliton_deviation(traj, 100.0, soliton_normalizer(spec), spec)
    assert dev <= 1e-12


def test_deviation_decreases_along_the_flow():
    gc = load_catalog("sol3")
    traj = integrate(FlowProblem(gc, np.array([2.0, 1.0, 3.0]), t0=1.0, t1=3e4))
    norm = normalizer_for(gc, np.array([2.0, 1.0, 3.0]), traj)
    d1 = soliton_deviation(traj, 1e2, norm)
    d2 = soliton_deviation(traj, 1e4, norm)
    assert d2 < d1
    assert d2 <= 1e-2
