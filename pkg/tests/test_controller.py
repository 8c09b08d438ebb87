"""Adaptive cascade controller tests: hand values, decay laws, positivity."""

import math

import numpy as np
import pytest

from sbfc import (
    AdaptiveState,
    ControllerGains,
    DimensionMismatch,
    InertiaBounds,
    JointState,
    Reference,
    ValidationError,
    actual_control,
    adaptive_step,
    compute_errors,
    control_step,
    paper_gains,
    virtual_control,
)

BOUNDS = InertiaBounds(i_min=0.5, i_max=4.0)


# ---------------------------------------------------------------------------
# hand-computed control values
# ---------------------------------------------------------------------------

def test_virtual_control_hand_value():
    gains = ControllerGains(delta1=62.0, zeta1=0.2)
    out = virtual_control([0.01, 0.0], gains, 1.0)
    # -(delta1 + zeta1 * phi1) / 2 * q = -(62.2 / 2) * 0.01 = -0.311
    np.testing.assert_allclose(out, [-0.311, 0.0], rtol=0, atol=1e-15)


def test_actual_control_hand_value():
    gains = ControllerGains(delta2=75.0, zeta2=3.5)
    out = actual_control([0.01, 0.0], gains, 2.0, InertiaBounds(i_min=0.5,
                                                                i_max=4.0))
    # -(75 + 3.5 * 2) / 2 * (1 / 0.5) * 0.01 = -0.82
    np.testing.assert_allclose(out, [-0.82, 0.0], rtol=0, atol=1e-15)


def test_default_gain_values():
    g = paper_gains()
    assert (g.delta1, g.delta2) == (62.0, 75.0)
    assert (g.zeta1, g.zeta2) == (0.2, 3.5)
    assert (g.sigma1, g.sigma2) == (5.6, 1.9)
    assert (g.k1, g.k2) == (1.4, 0.96)


def test_gains_array_round_trip():
    g = paper_gains()
    assert ControllerGains.from_array(g.as_array()) == g
    assert len(g.as_array()) == 8


# ---------------------------------------------------------------------------
# adaptive-estimate evolution
# ---------------------------------------------------------------------------

def test_estimate_decays_like_linear_ode_with_zero_error():
    # With q = 0 the update is phi' = -k sigma phi, whose exact solution
    # after one second is exp(-k sigma).
    phi = 1.0
    k, sigma, dt = 1.4, 5.6, 1e-4
    for _ in range(10_000):
        phi = adaptive_step(phi, [0.0, 0.0], k, sigma, 0.2, dt)
    assert abs(phi - math.exp(-k * sigma)) < 1e-12


def test_estimate_settles_at_balance_point():
    # Constant error drive: the stationary point is zeta ||q||^2 / (2 sigma).
    phi = 0.01
    k, sigma, zeta, dt = 1.4, 5.6, 3.5, 1e-4
    q = [0.3, -0.2]
    for _ in range(200_000):
        phi = adaptive_step(phi, q, k, sigma, zeta, dt)
    norm_sq = sum(v * v for v in q)
    assert abs(phi - zeta * norm_sq / (2 * sigma)) < 1e-9


def test_estimate_stays_positive_under_fuzzed_drive():
    rng = np.random.default_rng(7)
    qs = rng.uniform(-2, 2, (1000, 2))
    ks = rng.uniform(0.1, 5, 1000)
    sigmas = rng.uniform(0.1, 8, 1000)
    zetas = rng.uniform(0.05, 6, 1000)
    phi = 0.01
    for i in range(1_000_000):
        j = i % 1000
        phi = adaptive_step(phi, qs[j], ks[j], sigmas[j], zetas[j], 1e-4)
        assert phi > 0.0


def test_estimate_positive_even_from_floor():
    # Start at the smallest representable positive state the floor allows and
    # drive hard toward zero; the floor must keep the estimate positive.
    phi = 1e-12
    for _ in range(1000):
        phi = adaptive_step(phi, [0.0, 0.0], 5.0, 8.0, 0.1, 1e-2)
        assert phi > 0.0


# ---------------------------------------------------------------------------
# error coordinates and the full step
# ---------------------------------------------------------------------------

def test_error_coordinates():
    state = JointState(q=(0.5, -0.2), qd=(0.1, 0.3))
    ref = Reference(x_d=(0.4, 0.0), xd_dot=(0.0, 0.1), xd_ddot=(0.0, 0.0))
    e1, e2 = compute_errors(state, ref)
    np.testing.assert_allclose(e1, [0.1, -0.2], rtol=0, atol=1e-15)
    np.testing.assert_allclose(e2, [0.1, 0.2], rtol=0, atol=1e-15)


def test_full_step_composition_matches_pieces():
    # The one-call step must equal the documented sequence: first-stage error
    # update, first estimate integration, virtual control from the updated
    # estimate, second-stage error, second estimate integration, torque from
    # the updated second estimate.
    gains = paper_gains()
    state = JointState(q=(0.3, -0.1), qd=(0.2, 0.4))
    ref = Reference(x_d=(0.25, 0.0), xd_dot=(0.05, 0.0), xd_ddot=(0.0, 0.0))
    adaptive = AdaptiveState(phi1_hat=0.05, phi2_hat=0.07)
    dt = 1e-3

    torque, nxt, err = control_step(state, ref, adaptive, gains, BOUNDS, dt)

    e1 = np.array(state.q) - np.array(ref.x_d)
    phi1 = adaptive_step(adaptive.phi1_hat, e1, gains.k1, gains.sigma1,
                         gains.zeta1, dt)
    kappa1 = virtual_control(e1, gains, phi1)
    e2 = (np.array(state.qd) - np.array(ref.xd_dot))
    q2 = e2 - kappa1
    phi2 = adaptive_step(adaptive.phi2_hat, q2, gains.k2, gains.sigma2,
                         gains.zeta2, dt)
    expected = actual_control(q2, gains, phi2, BOUNDS)

    np.testing.assert_allclose(torque, expected, rtol=0, atol=1e-15)
    assert nxt.phi1_hat == phi1
    assert nxt.phi2_hat == phi2
    np.testing.assert_allclose(err.e1, e1, rtol=0, atol=0)
    np.testing.assert_allclose(err.q2_vec, q2, rtol=0, atol=1e-15)
    np.testing.assert_allclose(err.kappa1, kappa1, rtol=0, atol=1e-15)


def test_step_counts_floor_clamps():
    # A nonzero error drive with a huge decay rate over a one-second step
    # pushes the stage combination negative, so both estimates hit the floor.
    state = JointState(q=(0.1, 0.0), qd=(0.0, 0.0))
    ref = Reference(x_d=(0.0, 0.0), xd_dot=(0.0, 0.0), xd_ddot=(0.0, 0.0))
    adaptive = AdaptiveState(phi1_hat=1e-12, phi2_hat=1e-12)
    gains = ControllerGains(k1=50.0, sigma1=50.0, k2=50.0, sigma2=50.0)
    _, nxt, _ = control_step(state, ref, adaptive, gains, BOUNDS, 1.0)
    assert nxt.clamp_count == 2
    assert nxt.phi1_hat > 0.0
    assert nxt.phi2_hat > 0.0


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_gain_positivity_enforced():
    with pytest.raises(ValidationError):
        ControllerGains(delta1=0.0)
    with pytest.raises(ValidationError):
        ControllerGains(k2=-0.5)


def test_adaptive_state_positivity_enforced():
    with pytest.raises(ValidationError):
        AdaptiveState(phi1_hat=0.0, phi2_hat=0.01)
    with pytest.raises(ValidationError):
        AdaptiveState(phi1_hat=0.01, phi2_hat=-1.0)


def test_dimension_mismatch():
    state = JointState(q=(0.3, -0.1), qd=(0.2, 0.4))
    ref = Reference(x_d=(0.25,), xd_dot=(0.05,), xd_ddot=(0.0,))
    with pytest.raises(DimensionMismatch):
        compute_errors(state, ref)
