"""Closed-loop engine tests: determinism, parity, stitching, metrics."""

import math
from dataclasses import replace

import numpy as np
import pytest

import sbfc
from sbfc import (
    AdaptiveState,
    NumericalDivergence,
    Scenario,
    TorqueLimits,
    ValidationError,
    default_fault_scenario,
    default_scenario,
)
from sbfc.engine import (
    compute_metrics,
    fit_envelope,
    integrate_closed_loop_ode,
    resolve_initial_state,
    trace_columns,
)


@pytest.fixture(scope="module")
def fault_report():
    """One full canned two-fault run shared by the read-only tests."""
    return sbfc.run_report(default_fault_scenario())


# ---------------------------------------------------------------------------
# trace layout
# ---------------------------------------------------------------------------

def test_trace_column_layout():
    assert trace_columns(2) == (
        "t", "q_1", "q_2", "qd_1", "qd_2", "x_d_1", "x_d_2",
        "xd_dot_1", "xd_dot_2", "e1_1", "e1_2", "e2_1", "e2_2",
        "T_c_1", "T_c_2", "S_T_1", "S_T_2", "epsilon_1", "epsilon_2",
        "phi1_hat", "phi2_hat", "cost_window")
    assert len(trace_columns(3)) == 1 + 9 * 3 + 3


def test_single_step_run_produces_one_record():
    scenario = replace(default_scenario(), duration=1e-4)
    report = sbfc.run_report(scenario)
    assert len(report.trace) == 1
    assert report.trace.t[0] == 0.0
    metrics = compute_metrics(report.trace)
    assert math.isnan(metrics.convergence_time)


def test_record_count_follows_decimation():
    scenario = replace(default_scenario(), duration=0.01, decimation=10)
    assert len(sbfc.run_report(scenario).trace) == 10
    scenario = replace(default_scenario(), duration=0.01, decimation=7)
    assert len(sbfc.run_report(scenario).trace) == 15  # ceil(100 / 7)


def test_first_record_is_initial_condition():
    scenario = default_scenario()
    report = sbfc.run_report(replace(scenario, duration=0.01))
    state0 = resolve_initial_state(scenario)
    rec = report.trace.record(0)
    assert rec.q == state0.q
    assert rec.qd == state0.qd
    assert rec.epsilon == (0.0, 0.0)


# ---------------------------------------------------------------------------
# determinism and composability
# ---------------------------------------------------------------------------

def test_identical_runs_are_bit_identical():
    scenario = replace(default_fault_scenario(), duration=2.0)
    a = sbfc.run_report(scenario).trace
    b = sbfc.run_report(scenario).trace
    assert np.array_equal(a.data, b.data)


def test_step_matches_batch_kernel():
    scenario = replace(default_fault_scenario(), duration=0.5)
    report = sbfc.run_report(scenario)
    state = resolve_initial_state(scenario)
    adaptive = AdaptiveState(phi1_hat=scenario.phi1_init,
                             phi2_hat=scenario.phi2_init)
    records = []
    for k in range(scenario.steps):
        t = scenario.t_start + k * scenario.dt
        state, adaptive, record = sbfc.step(scenario, state, adaptive, t)
        if k % scenario.decimation == 0:
            records.append(record)
    walked = np.array([r.to_row() for r in records])
    # every column is bit-identical except the rolling-cost one: the batch
    # kernel averages over the trailing record window, while a lone step's
    # record covers only its own instant
    cw = report.trace.columns.index("cost_window")
    keep = [i for i in range(walked.shape[1]) if i != cw]
    assert np.array_equal(report.trace.data[:, keep], walked[:, keep])
    e1 = walked[:, [report.trace.columns.index("e1_1"),
                    report.trace.columns.index("e1_2")]]
    e2 = walked[:, [report.trace.columns.index("e2_1"),
                    report.trace.columns.index("e2_2")]]
    instant = np.sqrt((e1 * e1).sum(axis=1) + (e2 * e2).sum(axis=1))
    np.testing.assert_allclose(walked[:, cw], instant, rtol=1e-14, atol=0)


def test_restart_continues_the_same_run():
    full = replace(default_fault_scenario(), duration=2.0)
    whole = sbfc.run_report(full).trace
    first = sbfc.run_report(replace(full, duration=1.0))
    second = sbfc.run_report(replace(
        full, duration=1.0, t_start=1.0,
        initial_state=first.final_state,
        phi1_init=first.adaptive.phi1_hat,
        phi2_init=first.adaptive.phi2_hat))
    stitched = np.vstack([first.trace.data, second.trace.data])
    assert stitched.shape == whole.data.shape
    # the rolling-cost column restarts its window with the new run, so it is
    # excluded; all physical columns must agree to fp-accumulation noise
    cw = whole.columns.index("cost_window")
    keep = [i for i in range(stitched.shape[1]) if i != cw]
    assert np.abs(whole.data[:, keep] - stitched[:, keep]).max() < 1e-10


# ---------------------------------------------------------------------------
# physical guarantees on full runs
# ---------------------------------------------------------------------------

def test_fault_run_torque_always_within_limits(fault_report):
    st = fault_report.trace.block("S_T")
    lower, upper = default_scenario().limits.arrays()
    assert np.all(st <= upper)
    assert np.all(st >= lower)


def test_fault_run_settles_and_never_clamps(fault_report):
    metrics = compute_metrics(fault_report.trace)
    assert metrics.steady_tracking_error < 0.01
    assert fault_report.adaptive.clamp_count == 0


def test_fault_run_recovers_after_each_onset(fault_report):
    trace = fault_report.trace
    ebar = trace.e_bar()
    t = trace.t
    # each abrupt onset kicks the combined error norm by an order of
    # magnitude; within two seconds it must fall back near its pre-onset level
    for onset in (15.0, 20.0):
        before = ebar[(t >= onset - 1.0) & (t < onset)].max()
        spike = ebar[(t >= onset) & (t < onset + 1.0)].max()
        settled = ebar[(t >= onset + 2.0) & (t < onset + 3.0)].max()
        assert spike > 10.0 * before
        assert settled < 2.0 * before
    # the incipient fault degrades authority smoothly: no spike at all, and
    # tracking holds through the whole single-fault regime
    assert ebar[(t >= 10.0) & (t < 15.0)].max() < 0.01


def test_epsilon_columns_reflect_schedule(fault_report):
    trace = fault_report.trace
    t = trace.t
    eps = trace.block("epsilon")
    assert np.all(eps[t < 10.0] == 0.0)
    assert np.all(eps[(t >= 10.0) & (t < 15.0), 1] == 0.0)
    # the loss fraction is zero AT the onset instant and positive after it,
    # so test strictly past the first post-onset record
    assert np.all(eps[(t >= 10.0005) & (t < 20.0), 0] > 0.0)
    assert np.all(eps[t >= 15.0005, 1] > 0.0)
    # at t = 20 a fresh abrupt event supersedes the incipient one on joint 1
    # and restarts from zero developed loss at its own onset instant
    near20 = (t >= 19.9995) & (t <= 20.0005)
    assert np.all(eps[near20, 0] == 0.0)
    assert np.all(eps[t >= 20.0005, 0] > 0.0)


# ---------------------------------------------------------------------------
# failure modes
# ---------------------------------------------------------------------------

def test_divergence_carries_time_and_partial_trace():
    wild = replace(
        default_scenario(), duration=5.0,
        limits=TorqueLimits(lower=(-1e9, -1e9), upper=(1e9, 1e9)),
        gains=replace(default_scenario().gains, delta2=1e6))
    with pytest.raises(NumericalDivergence) as exc_info:
        sbfc.run_report(wild)
    err = exc_info.value
    assert 0.0 < err.time < 5.0
    assert len(err.partial_trace) >= 1


def test_scenario_validation():
    with pytest.raises(ValidationError):
        replace(default_scenario(), duration=0.0)
    with pytest.raises(ValidationError):
        replace(default_scenario(), dt=-1e-4)
    with pytest.raises(ValidationError):
        replace(default_scenario(), t_start=-1.0)
    with pytest.raises(ValidationError):
        replace(default_scenario(), phi1_init=0.0)
    from sbfc import DimensionMismatch
    with pytest.raises(DimensionMismatch):
        replace(default_scenario(),
                limits=TorqueLimits(lower=(-80.0,), upper=(80.0,)))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_envelope_fit_recovers_synthetic_decay():
    times = np.linspace(0.0, 2.0, 400)
    alpha, beta, mu = 7.0, 0.6, 0.003
    norms = beta * np.exp(-alpha * times) + mu
    a, b, m = fit_envelope(times, norms, window=2.0)
    assert abs(a - alpha) / alpha < 0.05
    assert abs(b - beta) / beta < 0.05
    assert abs(m - mu) < 5e-4


def test_convergence_time_detects_settled_run():
    # Build a synthetic trace whose error norm drops below the band at a
    # known instant and stays there.
    cols = trace_columns(2)
    n_rec = 200
    data = np.zeros((n_rec, len(cols)))
    data[:, 0] = np.linspace(0.0, 10.0, n_rec)
    e1_col = cols.index("e1_1")
    err = np.where(data[:, 0] < 4.0, 0.5, 1e-4)
    data[:, e1_col] = err
    trace = sbfc.Trace(columns=cols, data=data, n=2)
    metrics = compute_metrics(trace, band=0.005)
    assert abs(metrics.convergence_time - 4.0) < 0.1
    assert metrics.steady_tracking_error == 1e-4


def test_convergence_time_nan_when_never_settling():
    cols = trace_columns(2)
    data = np.zeros((100, len(cols)))
    data[:, 0] = np.linspace(0.0, 10.0, 100)
    data[:, cols.index("e1_1")] = 0.5
    trace = sbfc.Trace(columns=cols, data=data, n=2)
    assert math.isnan(compute_metrics(trace, band=0.005).convergence_time)


def test_regime_partition_uses_last_regime():
    # With an onset splitting the run, the headline convergence time comes
    # from the final regime only.
    cols = trace_columns(2)
    data = np.zeros((200, len(cols)))
    data[:, 0] = np.linspace(0.0, 10.0, 200)
    e1 = np.where(data[:, 0] < 2.0, 1e-4, np.where(data[:, 0] < 6.0, 0.5, 1e-4))
    data[:, cols.index("e1_1")] = e1
    trace = sbfc.Trace(columns=cols, data=data, n=2)
    metrics = compute_metrics(trace, band=0.005, onsets=(5.0,))
    assert len(metrics.regime_convergence_times) == 2
    assert abs(metrics.convergence_time - 6.0) < 0.1
    assert math.isnan(metrics.regime_convergence_times[0])


def test_max_torque_metric(fault_report):
    metrics = compute_metrics(fault_report.trace)
    assert metrics.max_torque == 80.0


# ---------------------------------------------------------------------------
# smooth coupled integration
# ---------------------------------------------------------------------------

def test_smooth_closed_loop_integration_matches_stepper():
    # On a pre-fault window the stage-exact integrator and the hold-per-step
    # kernel must agree to the hold's own accuracy.
    scenario = default_scenario()
    pre = sbfc.run_report(replace(scenario, duration=5.0))
    state = pre.final_state
    smooth, _, _ = integrate_closed_loop_ode(
        scenario, state, pre.adaptive.phi1_hat, pre.adaptive.phi2_hat,
        5.0, 0.2, scenario.dt)
    held = sbfc.run_report(replace(
        scenario, duration=0.2, t_start=5.0, initial_state=state,
        phi1_init=pre.adaptive.phi1_hat, phi2_init=pre.adaptive.phi2_hat))
    assert np.abs(np.array(smooth.q) - np.array(held.final_state.q)).max() < 1e-3
