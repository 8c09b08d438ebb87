"""Closed-loop simulation engine.

Each control step follows a fixed order: evaluate the reference, run the
controller (adaptive estimates update first, then the torque command),
freeze the fault realization at the current time, form the effective
(faulted + saturated) torque, evaluate the disturbance, then advance the
plant one RK4 step with the applied torques held constant (zero-order
hold).  The loop is fully deterministic: same scenario, same trace,
bit for bit.

Traces are decimated (every ``decimation``-th step is recorded, starting
at t = 0) and carry a rolling cost column: mean + population standard
deviation of the combined error norm over the trailing ``cost_window``
records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import maybe_jit
from .controller import (POSITIVITY_FLOOR, AdaptiveState, ControllerGains,
                         _control_core, paper_gains)
from .dynamics import (JointState, ManipulatorParams, _forward_core,
                       estimate_inertia_bounds, reference_params)
from .errors import (DimensionMismatch, NumericalDivergence, SingularInertia,
                     ValidationError)
from .faults import (FaultSchedule, TorqueLimits, _effective_core,
                     _schedule_core, default_fault_schedule)
from .signals import (DIST_LUMPED, DisturbanceSpec, TrajectorySpec,
                      _disturbance_core, _reference_core,
                      default_disturbance, default_trajectory)

__all__ = [
    "Scenario", "Trace", "TraceRecord", "RunMetrics", "RunReport",
    "default_limits", "default_scenario", "default_fault_scenario",
    "trace_columns", "resolve_initial_state", "run", "run_report", "step",
    "integrate_plant", "integrate_closed_loop_ode", "compute_metrics",
    "fit_envelope", "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e6

_VECTOR_FIELDS = ("q", "qd", "x_d", "xd_dot", "e1", "e2",
                  "T_c", "S_T", "epsilon")
_SCALAR_TAIL = ("phi1_hat", "phi2_hat", "cost_window")


def trace_columns(n):
    """Column names, in the normative record order, for an n-joint trace."""
    cols = ["t"]
    for name in _VECTOR_FIELDS:
        cols.extend(f"{name}_{i + 1}" for i in range(n))
    cols.extend(_SCALAR_TAIL)
    return tuple(cols)


# --------------------------------------------------------------------------
# numerical cores
# --------------------------------------------------------------------------

@maybe_jit
def _plant_rk4_core(lengths, masses, coms, inertias, gravity, viscous,
                    q, qd, tau, dt):
    """One RK4 step of the plant with the applied torque held constant."""
    n = q.shape[0]
    zero = np.zeros(n)
    a1, ok = _forward_core(lengths, masses, coms, inertias, gravity, viscous,
                           q, qd, tau, zero)
    if not ok:
        return q, qd, False
    q2 = q + (0.5 * dt) * qd
    v2 = qd + (0.5 * dt) * a1
    a2, ok = _forward_core(lengths, masses, coms, inertias, gravity, viscous,
                           q2, v2, tau, zero)
    if not ok:
        return q, qd, False
    q3 = q + (0.5 * dt) * v2
    v3 = qd + (0.5 * dt) * a2
    a3, ok = _forward_core(lengths, masses, coms, inertias, gravity, viscous,
                           q3, v3, tau, zero)
    if not ok:
        return q, qd, False
    q4 = q + dt * v3
    v4 = qd + dt * a3
    a4, ok = _forward_core(lengths, masses, coms, inertias, gravity, viscous,
                           q4, v4, tau, zero)
    if not ok:
        return q, qd, False
    qn = q + (dt / 6.0) * (qd + 2.0 * v2 + 2.0 * v3 + v4)
    vn = qd + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return qn, vn, True


@maybe_jit
def _run_core(lengths, masses, coms, inertias, gravity, viscous,
              tcode, tscalar, ttable, dcode,
              ev_joint, ev_active, ev_onset, ev_gamma, ev_cap, ev_tsat,
              lower, upper,
              delta1, delta2, zeta1, zeta2, sigma1, sigma2, k1, k2,
              i_min, q0, qd0, phi1_0, phi2_0,
              t0, steps, dt, decim, cost_win, out):
    """Full closed-loop run; fills `out` and returns the exit summary.

    Returns (status, n_records, clamp_count, phi1, phi2, t_stop, q, qd)
    with status 0 = completed, 1 = state magnitude above the divergence
    limit, 2 = singular inertia during the plant solve.
    """
    n = q0.shape[0]
    q = q0.copy()
    qd = qd0.copy()
    phi1 = phi1_0
    phi2 = phi2_0
    clamps = 0
    nrec = 0
    ring = np.zeros(cost_win)
    ring_i = 0
    ring_n = 0
    status = 0
    t_stop = t0 + steps * dt
    for k in range(steps):
        t = t0 + k * dt
        xd, xdd, _ = _reference_core(tcode, tscalar, ttable, t)
        t_c, phi1, phi2, c, e1, e2, _kap, _q2v = _control_core(
            q, qd, xd, xdd, phi1, phi2,
            delta1, delta2, zeta1, zeta2, sigma1, sigma2, k1, k2,
            i_min, dt)
        clamps += c
        eps, tsat = _schedule_core(ev_joint, ev_active, ev_onset, ev_gamma,
                                   ev_cap, ev_tsat, t, n)
        st, _s1, _s2, _lam, _smax = _effective_core(t_c, eps, tsat,
                                                    lower, upper)
        d = _disturbance_core(dcode, t, q, qd)
        if k % decim == 0:
            ssum = 0.0
            for i in range(n):
                ssum += e1[i] * e1[i] + e2[i] * e2[i]
            ring[ring_i] = np.sqrt(ssum)
            ring_i = (ring_i + 1) % cost_win
            if ring_n < cost_win:
                ring_n += 1
            mean = 0.0
            for i in range(ring_n):
                mean += ring[i]
            mean /= ring_n
            var = 0.0
            for i in range(ring_n):
                dv = ring[i] - mean
                var += dv * dv
            cost = mean + np.sqrt(var / ring_n)
            out[nrec, 0] = t
            col = 1
            for i in range(n):
                out[nrec, col + i] = q[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = qd[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = xd[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = xdd[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = e1[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = e2[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = t_c[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = st[i]
            col += n
            for i in range(n):
                out[nrec, col + i] = eps[i]
            col += n
            out[nrec, col] = phi1
            out[nrec, col + 1] = phi2
            out[nrec, col + 2] = cost
            nrec += 1
        tau = st + d
        qn, vn, ok = _plant_rk4_core(lengths, masses, coms, inertias,
                                     gravity, viscous, q, qd, tau, dt)
        if not ok:
            status = 2
            t_stop = t
            break
        q = qn
        qd = vn
        bad = False
        for i in range(n):
            if not (np.abs(q[i]) <= DIVERGENCE_LIMIT):
                bad = True
            if not (np.abs(qd[i]) <= DIVERGENCE_LIMIT):
                bad = True
        if bad:
            status = 1
            t_stop = t + dt
            break
    return status, nrec, clamps, phi1, phi2, t_stop, q, qd


# --------------------------------------------------------------------------
# public types
# --------------------------------------------------------------------------

def default_limits():
    """Symmetric +/- 80 N*m torque box for the two-joint default arm."""
    return TorqueLimits(upper=(80.0, 80.0), lower=(-80.0, -80.0))


@dataclass(frozen=True)
class Scenario:
    """Complete, self-contained description of one closed-loop run."""

    params: ManipulatorParams = field(default_factory=reference_params)
    limits: TorqueLimits = field(default_factory=default_limits)
    schedule: FaultSchedule = field(default_factory=lambda: FaultSchedule(events=()))
    gains: ControllerGains = field(default_factory=paper_gains)
    trajectory: TrajectorySpec = field(default_factory=default_trajectory)
    disturbance: DisturbanceSpec = field(default_factory=default_disturbance)
    duration: float = 30.0
    dt: float = 1e-4
    decimation: int = 10
    cost_window: int = 100
    band: float = 0.005
    phi1_init: float = 0.01
    phi2_init: float = 0.01
    initial_state: JointState | None = None
    t_start: float = 0.0
    seed: int = 0

    def __post_init__(self):
        n = self.params.n
        if not (np.isfinite(self.t_start) and self.t_start >= 0.0):
            raise ValidationError(
                f"t_start must be finite and >= 0, got {self.t_start}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not (np.isfinite(self.duration) and self.duration >= self.dt):
            raise ValidationError(
                f"duration must be >= dt, got duration={self.duration} "
                f"dt={self.dt}")
        if int(self.decimation) < 1:
            raise ValidationError(
                f"decimation must be >= 1, got {self.decimation}")
        object.__setattr__(self, "decimation", int(self.decimation))
        if int(self.cost_window) < 1:
            raise ValidationError(
                f"cost_window must be >= 1, got {self.cost_window}")
        object.__setattr__(self, "cost_window", int(self.cost_window))
        if not (np.isfinite(self.band) and self.band > 0):
            raise ValidationError(f"band must be > 0, got {self.band}")
        if self.phi1_init <= 0 or self.phi2_init <= 0:
            raise ValidationError("adaptive estimates must start > 0")
        if self.limits.n != n:
            raise DimensionMismatch(
                f"limits cover {self.limits.n} joints, plant has {n}")
        if self.trajectory.n != n:
            raise DimensionMismatch(
                f"trajectory covers {self.trajectory.n} joints, plant has {n}")
        if self.schedule.joints_required() > n:
            raise DimensionMismatch(
                f"fault schedule references joint "
                f"{self.schedule.joints_required() - 1}, plant has {n}")
        if self.disturbance.encode() == DIST_LUMPED and n != 2:
            raise ValidationError(
                "the lumped disturbance is defined for 2 joints; "
                "use disturbance kind 'zero' for other arms")
        if self.initial_state is not None and self.initial_state.n != n:
            raise DimensionMismatch(
                f"initial state has {self.initial_state.n} joints, "
                f"plant has {n}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n(self):
        return self.params.n

    @property
    def steps(self):
        return max(1, int(round(self.duration / self.dt)))


def default_scenario():
    """Two-joint arm, default gains and trajectory, no faults, 30 s."""
    return Scenario()


def default_fault_scenario():
    """The default scenario with the canned two-fault schedule applied."""
    return replace(default_scenario(), schedule=default_fault_schedule())


def resolve_initial_state(scenario):
    """Initial joint state: the explicit one, or the default offset start.

    The default start sits on the reference position plus an alternating
    +0.1/-0.1 rad offset per joint, at rest.
    """
    if scenario.initial_state is not None:
        return scenario.initial_state
    code, scalar, table = scenario.trajectory.encode()
    x0, _, _ = _reference_core(code, scalar, table, float(scenario.t_start))
    offs = np.array([0.1 * (-1.0) ** i for i in range(scenario.n)])
    return JointState(q=tuple(x0 + offs), qd=tuple(0.0 for _ in range(scenario.n)))


@dataclass(frozen=True)
class TraceRecord:
    """One recorded instant; field order here defines the CSV column order."""

    t: float
    q: tuple
    qd: tuple
    x_d: tuple
    xd_dot: tuple
    e1: tuple
    e2: tuple
    T_c: tuple
    S_T: tuple
    epsilon: tuple
    phi1_hat: float
    phi2_hat: float
    cost_window: float

    def to_row(self):
        row = [self.t]
        for name in _VECTOR_FIELDS:
            row.extend(getattr(self, name))
        row.extend((self.phi1_hat, self.phi2_hat, self.cost_window))
        return np.array(row)


@dataclass(frozen=True)
class Trace:
    """Decimated closed-loop record set backed by one float64 matrix."""

    columns: tuple
    data: np.ndarray
    n: int

    def __len__(self):
        return self.data.shape[0]

    def col(self, name):
        return self.data[:, self.columns.index(name)]

    def block(self, name):
        """The (records, n) slab of one vector field, e.g. 'e1' or 'S_T'."""
        start = self.columns.index(f"{name}_1")
        return self.data[:, start:start + self.n]

    @property
    def t(self):
        return self.data[:, 0]

    def e_bar(self):
        """Combined error norm sqrt(||e1||^2 + ||e2||^2) per record."""
        e1 = self.block("e1")
        e2 = self.block("e2")
        return np.sqrt((e1 * e1).sum(axis=1) + (e2 * e2).sum(axis=1))

    def record(self, i):
        row = self.data[i]
        vals = {"t": float(row[0])}
        col = 1
        for name in _VECTOR_FIELDS:
            vals[name] = tuple(row[col:col + self.n])
            col += self.n
        vals["phi1_hat"] = float(row[col])
        vals["phi2_hat"] = float(row[col + 1])
        vals["cost_window"] = float(row[col + 2])
        return TraceRecord(**vals)


@dataclass(frozen=True)
class RunMetrics:
    """Summary numbers for one trace.

    steady_tracking_error: max position-error infinity-norm over the final
    20 % of records.  convergence_time: first time the error norm enters
    the band and stays there for the remainder of its fault regime,
    evaluated on the last regime (NaN when it never settles).  Envelope
    numbers come from fitting beta * exp(-alpha t) + mu to the position
    error norm over the opening seconds.
    """

    steady_tracking_error: float
    convergence_time: float
    max_torque: float
    envelope_alpha: float
    envelope_beta: float
    envelope_mu: float
    band: float
    regime_convergence_times: tuple


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

def _kernel_args(scenario, state0):
    lengths, masses, coms, inertias, gravity, viscous = scenario.params.arrays()
    tcode, tscalar, ttable = scenario.trajectory.encode()
    dcode = scenario.disturbance.encode()
    ev = scenario.schedule.event_arrays()
    lower, upper = scenario.limits.arrays()
    g = scenario.gains
    bounds = estimate_inertia_bounds(scenario.params)
    q0, qd0 = state0.arrays()
    return (lengths, masses, coms, inertias, gravity, viscous,
            tcode, tscalar, ttable, dcode,
            *ev, lower, upper,
            g.delta1, g.delta2, g.zeta1, g.zeta2,
            g.sigma1, g.sigma2, g.k1, g.k2,
            bounds.i_min, q0.astype(float), qd0.astype(float),
            float(scenario.phi1_init), float(scenario.phi2_init))


@dataclass(frozen=True)
class RunReport:
    """Trace plus the loop's final internal state."""

    trace: Trace
    final_state: JointState
    adaptive: AdaptiveState
    t_end: float


def run_report(scenario):
    """Simulate the scenario start to finish.

    Returns a RunReport whose adaptive state carries the positivity-clamp
    counter for the whole run.  Raises NumericalDivergence if the state
    magnitude passes 1e6 and SingularInertia if the inertia solve breaks
    down; both exceptions carry `time` and `partial_trace` attributes
    covering the records produced before the failure.
    """
    state0 = resolve_initial_state(scenario)
    steps = scenario.steps
    decim = scenario.decimation
    n_rec_max = (steps + decim - 1) // decim
    cols = trace_columns(scenario.n)
    out = np.zeros((n_rec_max, len(cols)))
    status, nrec, clamps, phi1, phi2, t_stop, q, qd = _run_core(
        *_kernel_args(scenario, state0),
        float(scenario.t_start), steps, float(scenario.dt), decim,
        scenario.cost_window, out)
    trace = Trace(columns=cols, data=out[:nrec].copy(), n=scenario.n)
    if status == 1:
        err = NumericalDivergence(
            f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at "
            f"t = {t_stop:.6g} s")
        err.time = t_stop
        err.partial_trace = trace
        raise err
    if status == 2:
        err = SingularInertia(
            f"inertia solve pivot below 1e-12 at t = {t_stop:.6g} s")
        err.time = t_stop
        err.partial_trace = trace
        raise err
    return RunReport(
        trace=trace,
        final_state=JointState(q=tuple(q), qd=tuple(qd)),
        adaptive=AdaptiveState(phi1_hat=float(phi1), phi2_hat=float(phi2),
                               clamp_count=int(clamps)),
        t_end=float(t_stop),
    )


def run(scenario):
    """Simulate the scenario and return its Trace (see run_report)."""
    return run_report(scenario).trace


def step(scenario, state, adaptive, t, bounds=None):
    """One readable control + integration step (same cores as `run`).

    Returns (next JointState, next AdaptiveState, TraceRecord for time t).
    The record's rolling-cost entry covers this single instant.
    """
    if bounds is None:
        bounds = estimate_inertia_bounds(scenario.params)
    lengths, masses, coms, inertias, gravity, viscous = scenario.params.arrays()
    tcode, tscalar, ttable = scenario.trajectory.encode()
    q, qd = state.arrays()
    xd, xdd, _ = _reference_core(tcode, tscalar, ttable, float(t))
    g = scenario.gains
    t_c, phi1, phi2, clamps, e1, e2, _kap, _q2v = _control_core(
        q, qd, xd, xdd, adaptive.phi1_hat, adaptive.phi2_hat,
        g.delta1, g.delta2, g.zeta1, g.zeta2, g.sigma1, g.sigma2,
        g.k1, g.k2, bounds.i_min, float(scenario.dt))
    ev = scenario.schedule.event_arrays()
    eps, tsat = _schedule_core(*ev, float(t), scenario.n)
    lower, upper = scenario.limits.arrays()
    st, _s1, _s2, _lam, _smax = _effective_core(t_c, eps, tsat, lower, upper)
    d = _disturbance_core(scenario.disturbance.encode(), float(t), q, qd)
    ebar = math.sqrt(float(e1 @ e1) + float(e2 @ e2))
    record = TraceRecord(
        t=float(t), q=tuple(q), qd=tuple(qd), x_d=tuple(xd),
        xd_dot=tuple(xdd), e1=tuple(e1), e2=tuple(e2), T_c=tuple(t_c),
        S_T=tuple(st), epsilon=tuple(eps), phi1_hat=float(phi1),
        phi2_hat=float(phi2), cost_window=ebar)
    tau = st + d
    qn, vn, ok = _plant_rk4_core(lengths, masses, coms, inertias, gravity,
                                 viscous, q, qd, tau, float(scenario.dt))
    if not ok:
        raise SingularInertia(f"inertia solve pivot below 1e-12 at t = {t:.6g} s")
    if np.any(~(np.abs(qn) <= DIVERGENCE_LIMIT)) or np.any(~(np.abs(vn) <= DIVERGENCE_LIMIT)):
        raise NumericalDivergence(
            f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at "
            f"t = {t + scenario.dt:.6g} s")
    next_state = JointState(q=tuple(qn), qd=tuple(vn))
    next_adaptive = AdaptiveState(
        phi1_hat=float(phi1), phi2_hat=float(phi2),
        clamp_count=adaptive.clamp_count + int(clamps))
    return next_state, next_adaptive, record


def integrate_closed_loop_ode(scenario, state, phi1, phi2, t0, duration, dt):
    """Integrate the coupled closed-loop ODE with stage-time control.

    Unlike `run`, which holds the applied torque across each step
    (zero-order hold, the production loop), this treats plant and adaptive
    states as one smooth ODE and re-evaluates reference, controller,
    faults, and disturbance at every RK4 stage.  On segments where the
    right-hand side is smooth (no fault onsets, torques inside the
    limits), the endpoint converges at the integrator's full fourth
    order, which is what the step-halving order check measures.

    Returns (JointState, phi1, phi2) at t0 + duration.
    """
    lengths, masses, coms, inertias, gravity, viscous = scenario.params.arrays()
    tcode, tscalar, ttable = scenario.trajectory.encode()
    dcode = scenario.disturbance.encode()
    ev = scenario.schedule.event_arrays()
    lower, upper = scenario.limits.arrays()
    g = scenario.gains
    bounds = estimate_inertia_bounds(scenario.params)
    n = scenario.n
    q, qd = state.arrays()
    y = np.concatenate([q.astype(float), qd.astype(float),
                        [float(phi1), float(phi2)]])

    def rhs(t, y):
        q = y[:n]
        qd = y[n:2 * n]
        p1 = max(y[2 * n], POSITIVITY_FLOOR)
        p2 = max(y[2 * n + 1], POSITIVITY_FLOOR)
        xd, xdd, _ = _reference_core(tcode, tscalar, ttable, t)
        e1 = q - xd
        dp1 = (-g.k1 * g.sigma1 * p1
               + 0.5 * g.zeta1 * g.k1 * float(e1 @ e1))
        kappa1 = -0.5 * (g.delta1 + g.zeta1 * p1) * e1
        e2 = qd - xdd
        q2v = e2 - kappa1
        dp2 = (-g.k2 * g.sigma2 * p2
               + 0.5 * g.zeta2 * g.k2 * float(q2v @ q2v))
        t_c = -0.5 * (g.delta2 + g.zeta2 * p2) / bounds.i_min * q2v
        eps, tsat = _schedule_core(*ev, t, n)
        st, _s1, _s2, _lam, _smax = _effective_core(t_c, eps, tsat,
                                                    lower, upper)
        d = _disturbance_core(dcode, t, q, qd)
        qdd, ok = _forward_core(lengths, masses, coms, inertias, gravity,
                                viscous, q, qd, st + d, np.zeros(n))
        if not ok:
            raise SingularInertia(
                f"inertia solve pivot below 1e-12 at t = {t:.6g} s")
        return np.concatenate([qd, qdd, [dp1, dp2]])

    steps = max(1, int(round(duration / dt)))
    for k in range(steps):
        t = t0 + k * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return (JointState(q=tuple(y[:n]), qd=tuple(y[n:2 * n])),
            float(y[2 * n]), float(y[2 * n + 1]))


def integrate_plant(params, state, torque, duration, dt, tau_external=None):
    """Integrate the bare plant under a continuous torque law.

    `torque` is a callable (t, q, qd) -> per-joint torque, evaluated at
    every RK4 stage (no hold), which keeps the integrator at its full
    fourth-order accuracy for smooth laws.  Returns (times, qs, qds)
    including the initial sample.
    """
    lengths, masses, coms, inertias, gravity, viscous = params.arrays()
    n = params.n
    zero = np.zeros(n)
    ext = zero if tau_external is None else np.asarray(tau_external, float)
    steps = max(1, int(round(duration / dt)))
    q, qd = state.arrays()
    q = q.astype(float)
    qd = qd.astype(float)
    times = np.zeros(steps + 1)
    qs = np.zeros((steps + 1, n))
    qds = np.zeros((steps + 1, n))
    qs[0] = q
    qds[0] = qd

    def accel(t, qq, vv):
        tau = np.asarray(torque(t, qq, vv), dtype=float)
        a, ok = _forward_core(lengths, masses, coms, inertias, gravity,
                              viscous, qq, vv, tau, ext)
        if not ok:
            raise SingularInertia(
                f"inertia solve pivot below 1e-12 at t = {t:.6g} s")
        return a

    for k in range(steps):
        t = k * dt
        a1 = accel(t, q, qd)
        v2 = qd + 0.5 * dt * a1
        a2 = accel(t + 0.5 * dt, q + 0.5 * dt * qd, v2)
        v3 = qd + 0.5 * dt * a2
        a3 = accel(t + 0.5 * dt, q + 0.5 * dt * v2, v3)
        v4 = qd + dt * a3
        a4 = accel(t + dt, q + dt * v3, v4)
        q = q + (dt / 6.0) * (qd + 2.0 * v2 + 2.0 * v3 + v4)
        qd = qd + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        times[k + 1] = t + dt
        qs[k + 1] = q
        qds[k + 1] = qd
    return times, qs, qds


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def fit_envelope(times, norms, window=2.0):
    """Fit beta * exp(-alpha t) + mu to an error-norm transient.

    mu is the mean over the last quarter of the window; alpha and beta
    come from a log-linear least-squares fit of the positive residual over
    the rest.  Returns (alpha, beta, mu), NaNs when the fit is degenerate.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    sel = times <= window
    t = times[sel]
    y = norms[sel]
    if t.size < 4:
        return math.nan, math.nan, math.nan
    tail = t >= 0.75 * window
    if not tail.any():
        return math.nan, math.nan, math.nan
    mu = float(y[tail].mean())
    resid = y - mu
    head = (t < 0.75 * window) & (resid > max(1e-12, 0.01 * resid.max()))
    if head.sum() < 2:
        return math.nan, math.nan, mu
    slope, intercept = np.polyfit(t[head], np.log(resid[head]), 1)
    return float(-slope), float(math.exp(intercept)), mu


def _regime_edges(onsets, t_end):
    edges = [0.0]
    for onset in sorted(set(float(o) for o in onsets)):
        if 0.0 < onset < t_end and onset not in edges:
            edges.append(onset)
    edges.append(math.inf)
    return edges


def compute_metrics(trace, band=0.005, onsets=(), envelope_window=2.0):
    """Summarize a trace; `onsets` are the fault regime boundaries."""
    if len(trace) == 0:
        raise ValidationError("cannot compute metrics on an empty trace")
    t = trace.t
    e1 = trace.block("e1")
    st = trace.block("S_T")
    e1_inf = np.abs(e1).max(axis=1)
    e1_l2 = np.sqrt((e1 * e1).sum(axis=1))

    tail_start = int(math.floor(0.8 * len(trace)))
    steady = float(e1_inf[tail_start:].max())
    max_torque = float(np.abs(st).max())

    edges = _regime_edges(onsets, float(t[-1]))
    regime_times = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        in_regime = (t >= lo) & (t < hi)
        idx = np.nonzero(in_regime)[0]
        if idx.size == 0:
            regime_times.append(math.nan)
            continue
        below = e1_inf[idx] < band
        # last index where the error is NOT below the band
        bad = np.nonzero(~below)[0]
        if bad.size == idx.size:
            regime_times.append(math.nan)
        elif bad.size == 0:
            regime_times.append(float(t[idx[0]]))
        else:
            first_ok = bad[-1] + 1
            if first_ok >= idx.size:
                regime_times.append(math.nan)
            else:
                regime_times.append(float(t[idx[first_ok]]))
    alpha, beta, mu = fit_envelope(t, e1_l2, window=envelope_window)
    return RunMetrics(
        steady_tracking_error=steady,
        convergence_time=regime_times[-1],
        max_torque=max_torque,
        envelope_alpha=alpha,
        envelope_beta=beta,
        envelope_mu=mu,
        band=float(band),
        regime_convergence_times=tuple(regime_times),
    )
