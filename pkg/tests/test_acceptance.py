"""Acceptance gate: one test per headline requirement, with runtime budgets.

Each test measures its own wall time and asserts both the behavioural
tolerance and the stated budget, so the -v report reads as one pass/fail
line per requirement.
"""

import csv
import math
import time
from dataclasses import replace

import numpy as np
import pytest

import sbfc
from sbfc import (
    AdaptiveState,
    ControllerGains,
    FaultSchedule,
    JointState,
    TorqueLimits,
    adaptive_step,
    coriolis_matrix,
    default_fault_scenario,
    default_scenario,
    gravity_vector,
    inertia_matrix,
    mechanical_energy,
    reference_params,
    saturation_coeffs,
)
from sbfc.config import build_scenario, preset_config
from sbfc.engine import compute_metrics, integrate_closed_loop_ode, integrate_plant
from sbfc.faults import FaultRealization, effective_torque, realize
from sbfc.jaya import TunerConfig, jaya_update, tune_episodic, tune_surrogate

from conftest import run_cli


def assert_torque_within_limits(trace, limits):
    applied = trace.block("S_T")
    lower, upper = limits.arrays()
    assert np.all(applied <= upper)
    assert np.all(applied >= lower)


@pytest.fixture(scope="module")
def fault_report():
    return sbfc.run_report(default_fault_scenario())


def test_criterion_1_plant_model_validity():
    start = time.perf_counter()
    params = reference_params()
    rng = np.random.default_rng(100)

    # symmetric positive definite inertia on 1000 random configurations
    for _ in range(1000):
        q = rng.uniform(-np.pi, np.pi, 2)
        m = inertia_matrix(params, q)
        np.testing.assert_allclose(m, m.T, rtol=0, atol=1e-14)
        assert np.linalg.eigvalsh(m).min() > 0.0

    # skew symmetry of (inertia rate - 2 * coriolis)
    h = 1e-6
    for _ in range(200):
        q = rng.uniform(-np.pi, np.pi, 2)
        qd = rng.uniform(-3, 3, 2)
        v = rng.uniform(-1, 1, 2)
        mdot = (inertia_matrix(params, q + h * qd)
                - inertia_matrix(params, q - h * qd)) / (2 * h)
        assert abs(v @ (mdot - 2 * coriolis_matrix(params, q, qd)) @ v) < 1e-9

    # gravity torque equals the potential-energy gradient
    def potential(q):
        return mechanical_energy(params, JointState(q=tuple(q), qd=(0.0, 0.0)))

    for _ in range(200):
        q = rng.uniform(-np.pi, np.pi, 2)
        grad = np.array([
            (potential(q + [h, 0]) - potential(q - [h, 0])) / (2 * h),
            (potential(q + [0, h]) - potential(q - [0, h])) / (2 * h)])
        np.testing.assert_allclose(gravity_vector(params, q), grad,
                                   rtol=0, atol=1e-6)

    # torque-free energy conservation over one second
    state = JointState(q=(0.4, -0.7), qd=(0.3, 0.1))
    e0 = mechanical_energy(params, state)
    _, qs, qds = integrate_plant(params, state,
                                 lambda t, q, qd: np.zeros(2), 1.0, 1e-4)
    e1 = mechanical_energy(params, JointState(q=tuple(qs[-1]),
                                              qd=tuple(qds[-1])))
    assert abs(e1 - e0) / abs(e0) < 1e-5

    assert time.perf_counter() - start < 10.0


def test_criterion_2_saturation_equivalence(fault_report):
    start = time.perf_counter()
    rng = np.random.default_rng(200)
    no_fault = FaultSchedule(events=())

    for _ in range(10_000):
        n = int(rng.integers(1, 4))
        up = rng.uniform(0.5, 100, n)
        lo = -rng.uniform(0.5, 100, n)
        lim = TorqueLimits(lower=tuple(lo), upper=tuple(up))
        t_c = rng.uniform(-300, 300, n)
        s1, s2 = saturation_coeffs(t_c, lim)
        np.testing.assert_allclose(s1 * t_c + s2, np.clip(t_c, lo, up),
                                   rtol=0, atol=1e-12)
        base = realize(no_fault, lim, t_c, 0.0)
        pinned = FaultRealization(
            epsilon=rng.uniform(0, 1, n), t_sat=rng.uniform(-200, 200, n),
            s1=base.s1, s2=base.s2, lambda_bar=base.lambda_bar,
            s_max=base.s_max, limits=lim)
        out = effective_torque(t_c, pinned)
        assert np.all(out <= up + 1e-12)
        assert np.all(out >= lo - 1e-12)

    # hard assertion on a complete faulted closed-loop trace
    assert_torque_within_limits(fault_report.trace,
                                default_fault_scenario().limits)
    assert time.perf_counter() - start < 5.0


def test_criterion_3_estimate_positivity(fault_report):
    start = time.perf_counter()
    rng = np.random.default_rng(300)
    qs = rng.uniform(-2, 2, (1000, 2))
    ks = rng.uniform(0.1, 5, 1000)
    sigmas = rng.uniform(0.1, 8, 1000)
    zetas = rng.uniform(0.05, 6, 1000)
    phi1, phi2 = 0.01, 0.01
    for i in range(500_000):
        j = i % 1000
        jr = (i * 7 + 3) % 1000
        phi1 = adaptive_step(phi1, qs[j], ks[j], sigmas[j], zetas[j], 1e-4)
        phi2 = adaptive_step(phi2, qs[jr], ks[jr], sigmas[jr], zetas[jr], 1e-4)
        assert phi1 > 0.0
        assert phi2 > 0.0

    # floor clamp never fires on the standard time step
    assert fault_report.adaptive.clamp_count == 0
    assert time.perf_counter() - start < 20.0


def test_criterion_4_healthy_regime_tracking():
    start = time.perf_counter()
    scenario = default_scenario()
    assert scenario.gains == ControllerGains(
        delta1=62.0, delta2=75.0, zeta1=0.2, zeta2=3.5,
        sigma1=5.6, sigma2=1.9, k1=1.4, k2=0.96)
    report = sbfc.run_report(scenario)
    metrics = compute_metrics(report.trace)
    assert metrics.steady_tracking_error < 0.01
    assert metrics.envelope_alpha > 0.0
    assert_torque_within_limits(report.trace, scenario.limits)
    assert time.perf_counter() - start < 60.0


def test_criterion_5_fault_regime_ordering(tmp_path):
    start = time.perf_counter()
    out = tmp_path / "regimes"
    res = run_cli(["sweep", "--preset", "table1-sbfc", "--out", out],
                  tmp_path)
    assert res.returncode == 0, res.stderr
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["name"] for r in rows] == ["normal", "one-fault", "two-fault"]
    steadies = [float(r["steady_tracking_error"]) for r in rows]
    assert steadies[0] <= steadies[1] <= steadies[2]
    assert all(s < 0.02 for s in steadies)
    assert time.perf_counter() - start < 180.0


def test_criterion_6_search_update_correctness():
    start = time.perf_counter()

    # recomposition identity with the recorded random draws
    rng = np.random.default_rng(600)
    for _ in range(2000):
        c = rng.uniform(0.05, 20, 8)
        cb = rng.uniform(0.05, 20, 8)
        cw = rng.uniform(0.05, 20, 8)
        new, r1, r2 = jaya_update(c, cb, cw, rng=rng)
        recomposed = c + r1 * (cb - c) - r2 * (cw - c)
        recomposed[recomposed <= 0.0] = 1e-9
        assert np.array_equal(new, recomposed)
        assert np.all(new > 0.0)

    # monotone descent and quadratic-bowl convergence for twenty seeds
    for seed in range(1, 21):
        cfg = TunerConfig(mode="surrogate", population=10, iterations=200,
                          seed=seed)
        result = tune_surrogate(cfg)
        best = [row[1] for row in result.history]
        assert all(b <= a for a, b in zip(best, best[1:]))
        assert best[-1] < 1e-2
        for row in result.history:
            assert all(v > 0 for v in row[3:])
        assert all(v > 0 for c in result.population.candidates
                   for v in c.values)

    assert time.perf_counter() - start < 30.0


def test_criterion_7_episodic_tuning_improves_gains():
    start = time.perf_counter()
    healthy = build_scenario(preset_config("healthy"))
    cfg = TunerConfig(mode="episodic", population=2, iterations=50,
                      horizon_s=5.0, seed=0)
    result = tune_episodic(healthy, cfg)

    episode = replace(healthy, duration=cfg.horizon_s)

    def steady_of(values):
        gains = ControllerGains.from_array(np.asarray(values))
        trace = sbfc.run_report(replace(episode, gains=gains)).trace
        return compute_metrics(trace).steady_tracking_error

    initial_best = steady_of(result.history[0][3:])
    tuned = steady_of(result.best.values)
    assert tuned <= initial_best
    assert time.perf_counter() - start < 600.0


def test_criterion_8_integrator_order():
    scenario = default_scenario()
    settled = sbfc.run_report(replace(scenario, duration=5.0))
    state = settled.final_state
    phi1 = settled.adaptive.phi1_hat
    phi2 = settled.adaptive.phi2_hat

    ends = {}
    for dt in (2e-3, 1e-3, 5e-4, 6.25e-5):
        s, p1, p2 = integrate_closed_loop_ode(
            scenario, state, phi1, phi2, 5.0, 1.0, dt)
        ends[dt] = np.concatenate([s.q, s.qd, [p1, p2]])
    ref = ends[6.25e-5]
    err = {dt: np.linalg.norm(ends[dt] - ref) for dt in (2e-3, 1e-3, 5e-4)}
    first = err[2e-3] / err[1e-3]
    second = err[1e-3] / err[5e-4]
    assert 8.0 <= first <= 32.0, f"halving gain {first:.2f} outside [8, 32]"
    assert 8.0 <= second <= 32.0, f"halving gain {second:.2f} outside [8, 32]"


def test_primary_suite_is_independent_of_the_plot_package():
    # the simulator library, CLI, and this whole test tree must run with the
    # figure package absent: nothing here may even name it
    import pathlib
    import subprocess
    import sys

    root = pathlib.Path(__file__).resolve().parents[1]
    sources = list((root / "src").rglob("*.py"))
    sources += [p for p in (root / "tests").glob("*.py")
                if p.name != pathlib.Path(__file__).name]
    for path in sources:
        assert "traceplots" not in path.read_text(), path
    # a fresh interpreter importing the whole simulator must not load the
    # figure package (this process is no witness: the test runner may have
    # imported the figure suite during collection)
    probe = ("import sys, sbfc, sbfc.cli, sbfc.config, sbfc.engine, "
             "sbfc.faults, sbfc.jaya, sbfc.traceio; "
             "sys.exit(1 if 'traceplots' in sys.modules else 0)")
    res = subprocess.run([sys.executable, "-c", probe],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr


def test_criterion_9_preset_runs_bit_identical(tmp_path):
    out_a = tmp_path / "rep_a"
    out_b = tmp_path / "rep_b"
    for out in (out_a, out_b):
        res = run_cli(["simulate", "--preset", "two-fault", "--seed", "11",
                       "--out", out], tmp_path)
        assert res.returncode == 0, res.stderr
    assert (out_a / "trace.csv").read_bytes() == \
        (out_b / "trace.csv").read_bytes()
    assert (out_a / "metrics.txt").read_bytes() == \
        (out_b / "metrics.txt").read_bytes()
    assert (out_a / "manifest.json").read_bytes() == \
        (out_b / "manifest.json").read_bytes()
