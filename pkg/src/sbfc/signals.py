"""Reference trajectories and exogenous joint-space disturbances.

Three trajectory families cover the scenarios: per-joint sinusoids with a
shared angular rate (the default tracking task), constant set-points, and
quintic point-to-point blends with zero boundary velocity and
acceleration.  All derivatives are analytic — nothing here is obtained by
finite differencing.

The default disturbance is a lumped torque acting on a two-joint arm,
mixing state-dependent and purely time-dependent sinusoidal terms; a
"zero" variant turns it off for clean plant audits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import maybe_jit
from .controller import Reference
from .errors import ValidationError

__all__ = [
    "TrajectorySpec", "DisturbanceSpec",
    "default_trajectory", "default_disturbance",
    "reference_at", "disturbance_at", "disturbance_bound",
    "TRAJ_SINE", "TRAJ_CONSTANT", "TRAJ_BLEND", "DIST_LUMPED", "DIST_ZERO",
]

TRAJ_SINE = 0
TRAJ_CONSTANT = 1
TRAJ_BLEND = 2

DIST_LUMPED = 0
DIST_ZERO = 1

_TRAJ_CODES = {"sine": TRAJ_SINE, "constant": TRAJ_CONSTANT,
               "blend": TRAJ_BLEND}
_DIST_CODES = {"lumped": DIST_LUMPED, "zero": DIST_ZERO}


# --------------------------------------------------------------------------
# numerical cores
# --------------------------------------------------------------------------

@maybe_jit
def _reference_core(code, scalar, table, t):
    """Evaluate (x_d, xd_dot, xd_ddot) for an encoded trajectory."""
    n = table.shape[0]
    x = np.empty(n)
    v = np.empty(n)
    a = np.empty(n)
    if code == 0:  # sine: table rows = (amplitude, phase, offset)
        w = scalar
        for i in range(n):
            amp = table[i, 0]
            arg = w * t + table[i, 1]
            s = np.sin(arg)
            c = np.cos(arg)
            x[i] = amp * s + table[i, 2]
            v[i] = amp * w * c
            a[i] = -amp * w * w * s
    elif code == 1:  # constant: table rows = (position, 0, 0)
        for i in range(n):
            x[i] = table[i, 0]
            v[i] = 0.0
            a[i] = 0.0
    else:  # quintic blend: table rows = (start, goal, 0), scalar = duration
        big_t = scalar
        tau = t / big_t
        if tau < 0.0:
            tau = 0.0
        if tau > 1.0:
            tau = 1.0
        s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
        one = 1.0 - tau
        ds = 30.0 * tau * tau * one * one / big_t
        dds = 60.0 * tau * one * (1.0 - 2.0 * tau) / (big_t * big_t)
        for i in range(n):
            span = table[i, 1] - table[i, 0]
            x[i] = table[i, 0] + span * s
            v[i] = span * ds
            a[i] = span * dds
    return x, v, a


@maybe_jit
def _disturbance_core(code, t, q, qd):
    """Lumped disturbance torque for a two-joint arm, or zeros."""
    n = q.shape[0]
    d = np.zeros(n)
    if code == 0:
        d[0] = 0.6 * np.sin(0.8 * qd[0] * q[1]) + 3.0 * np.sin(2.0 * t)
        d[1] = (-1.6 * np.sin(1.8 * q[1]) + 1.3 * np.sin(0.7 * qd[1])
                - 0.2 * q[1])
    return d


# --------------------------------------------------------------------------
# public types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectorySpec:
    """Declarative description of the desired joint trajectory.

    kind="sine":     x_d[i] = amplitude[i] sin(omega t + phase[i]) + offset[i]
    kind="constant": x_d = positions, zero derivatives
    kind="blend":    quintic interpolation start -> goal over `duration`
                     seconds, at rest on both ends, then holding the goal.
    """

    kind: str = "sine"
    omega: float = 1.0 / (4.0 * np.pi)
    amplitude: tuple = (1.0, 1.0)
    phase: tuple = (0.0, np.pi / 3.0)
    offset: tuple = (-1.0, 0.0)
    positions: tuple = ()
    start: tuple = ()
    goal: tuple = ()
    duration: float = 1.0

    def __post_init__(self):
        if self.kind not in _TRAJ_CODES:
            raise ValidationError(
                f"unknown trajectory kind {self.kind!r}; expected one of "
                f"{sorted(_TRAJ_CODES)}")
        for name in ("amplitude", "phase", "offset", "positions",
                     "start", "goal"):
            object.__setattr__(
                self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "duration", float(self.duration))
        if self.kind == "sine":
            if not (len(self.amplitude) == len(self.phase) == len(self.offset)):
                raise ValidationError(
                    "sine trajectory needs amplitude, phase, offset of "
                    "equal length")
            if len(self.amplitude) == 0:
                raise ValidationError("sine trajectory needs >= 1 joint")
            if not np.isfinite(self.omega):
                raise ValidationError("omega must be finite")
        elif self.kind == "constant":
            if len(self.positions) == 0:
                raise ValidationError("constant trajectory needs positions")
        else:
            if len(self.start) == 0 or len(self.start) != len(self.goal):
                raise ValidationError(
                    "blend trajectory needs start and goal of equal length")
            if not (np.isfinite(self.duration) and self.duration > 0):
                raise ValidationError(
                    f"blend duration must be > 0, got {self.duration}")

    @property
    def n(self):
        if self.kind == "sine":
            return len(self.amplitude)
        if self.kind == "constant":
            return len(self.positions)
        return len(self.start)

    def encode(self):
        """Pack into (code, scalar, table) for the numerical core."""
        code = _TRAJ_CODES[self.kind]
        table = np.zeros((self.n, 3))
        if self.kind == "sine":
            table[:, 0] = self.amplitude
            table[:, 1] = self.phase
            table[:, 2] = self.offset
            return code, self.omega, table
        if self.kind == "constant":
            table[:, 0] = self.positions
            return code, 0.0, table
        table[:, 0] = self.start
        table[:, 1] = self.goal
        return code, self.duration, table


@dataclass(frozen=True)
class DisturbanceSpec:
    """Exogenous joint-torque disturbance selector.

    kind="lumped" is the default mixed state/time disturbance (two-joint
    arms only); kind="zero" disables it for any joint count.
    """

    kind: str = "lumped"

    def __post_init__(self):
        if self.kind not in _DIST_CODES:
            raise ValidationError(
                f"unknown disturbance kind {self.kind!r}; expected one of "
                f"{sorted(_DIST_CODES)}")

    def encode(self):
        return _DIST_CODES[self.kind]


def default_trajectory():
    """Per-joint sinusoids: slow shared rate, 60-degree phase split."""
    return TrajectorySpec()


def default_disturbance():
    return DisturbanceSpec()


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def reference_at(spec, t):
    """Evaluate the desired trajectory and its two analytic derivatives."""
    code, scalar, table = spec.encode()
    x, v, a = _reference_core(code, scalar, table, float(t))
    return Reference(x_d=tuple(x), xd_dot=tuple(v), xd_ddot=tuple(a))


def disturbance_at(spec, t, state):
    """Disturbance torque at time t for the given joint state."""
    q, qd = state.arrays()
    code = spec.encode()
    if code == DIST_LUMPED and q.shape[0] != 2:
        raise ValidationError(
            f"lumped disturbance is defined for 2 joints, got {q.shape[0]}")
    return _disturbance_core(code, float(t), q, qd)


def disturbance_bound(spec, q2=0.0):
    """Per-joint worst-case magnitude of the disturbance torque.

    For the lumped variant: |d1| <= 0.6 + 3.0 and
    |d2| <= 1.6 + 1.3 + 0.2 |q2|.
    """
    if spec.encode() == DIST_ZERO:
        return np.zeros(2)
    return np.array([0.6 + 3.0, 1.6 + 1.3 + 0.2 * abs(q2)])
