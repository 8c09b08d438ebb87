"""Subsystem-based adaptive fault-tolerant controller.

Two cascaded subsystems drive tracking: the position block turns the
position error into a virtual velocity command, and the velocity block
turns the remaining velocity error into the torque command.  Each block
carries one scalar adaptive estimate ``phi_hat`` driven by a
leaky-integrator law, so the loop stiffens itself against unmodeled
disturbance and fault-induced authority loss without ever differentiating
the virtual command.

Per control step, the exact operation order is:
``e1 -> Q1 -> phi1 step -> kappa1 -> e2 -> Q2 -> phi2 step -> T_c``,
with each block using its freshly updated estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import maybe_jit
from .errors import DimensionMismatch, ValidationError

__all__ = [
    "ControllerGains", "AdaptiveState", "Reference", "ErrorState",
    "paper_gains", "compute_errors", "virtual_control", "adaptive_step",
    "actual_control", "control_step", "POSITIVITY_FLOOR",
]

POSITIVITY_FLOOR = 1e-12


# --------------------------------------------------------------------------
# numerical cores
# --------------------------------------------------------------------------

@maybe_jit
def _phi_rk4_core(phi, a, b, dt):
    """One RK4 step of phi' = -a*phi + b; returns (phi', clamped_flag)."""
    f1 = -a * phi + b
    f2 = -a * (phi + 0.5 * dt * f1) + b
    f3 = -a * (phi + 0.5 * dt * f2) + b
    f4 = -a * (phi + dt * f3) + b
    out = phi + dt / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
    if out < POSITIVITY_FLOOR:
        return POSITIVITY_FLOOR, 1
    return out, 0


@maybe_jit
def _control_core(q, qd, xd, xddot, phi1, phi2,
                  delta1, delta2, zeta1, zeta2, sigma1, sigma2, k1, k2,
                  i_min, dt):
    """Full control step on primitive arrays.

    Returns (t_c, phi1', phi2', clamps, e1, e2, kappa1, q2_vec).
    """
    n = q.shape[0]
    e1 = np.empty(n)
    for i in range(n):
        e1[i] = q[i] - xd[i]
    # Q1 == e1
    norm1_sq = 0.0
    for i in range(n):
        norm1_sq += e1[i] * e1[i]
    phi1_new, c1 = _phi_rk4_core(phi1, k1 * sigma1,
                                 0.5 * zeta1 * k1 * norm1_sq, dt)
    kappa1 = np.empty(n)
    g1 = -0.5 * (delta1 + zeta1 * phi1_new)
    for i in range(n):
        kappa1[i] = g1 * e1[i]
    e2 = np.empty(n)
    q2_vec = np.empty(n)
    norm2_sq = 0.0
    for i in range(n):
        e2[i] = qd[i] - xddot[i]
        q2_vec[i] = e2[i] - kappa1[i]
        norm2_sq += q2_vec[i] * q2_vec[i]
    phi2_new, c2 = _phi_rk4_core(phi2, k2 * sigma2,
                                 0.5 * zeta2 * k2 * norm2_sq, dt)
    t_c = np.empty(n)
    g2 = -0.5 * (delta2 + zeta2 * phi2_new) / i_min
    for i in range(n):
        t_c[i] = g2 * q2_vec[i]
    return t_c, phi1_new, phi2_new, c1 + c2, e1, e2, kappa1, q2_vec


# --------------------------------------------------------------------------
# public types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ControllerGains:
    """Eight strictly positive controller gains."""

    delta1: float = 62.0
    delta2: float = 75.0
    zeta1: float = 0.2
    zeta2: float = 3.5
    sigma1: float = 5.6
    sigma2: float = 1.9
    k1: float = 1.4
    k2: float = 0.96

    FIELD_ORDER = ("delta1", "delta2", "zeta1", "zeta2",
                   "sigma1", "sigma2", "k1", "k2")

    def __post_init__(self):
        for name in self.FIELD_ORDER:
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(
                    f"gain {name} must be strictly positive and finite, got {v}")

    def as_array(self):
        return np.array([getattr(self, f) for f in self.FIELD_ORDER])

    @classmethod
    def from_array(cls, arr):
        return cls(**{f: float(v) for f, v in zip(cls.FIELD_ORDER, arr)})


def paper_gains():
    """The documented default gain set."""
    return ControllerGains()


@dataclass(frozen=True)
class AdaptiveState:
    """Scalar adaptive estimates; strictly positive at all times."""

    phi1_hat: float = 0.01
    phi2_hat: float = 0.01
    clamp_count: int = 0

    def __post_init__(self):
        if self.phi1_hat <= 0 or self.phi2_hat <= 0:
            raise ValidationError(
                f"adaptive estimates must stay > 0, got "
                f"({self.phi1_hat}, {self.phi2_hat})")


@dataclass(frozen=True)
class Reference:
    """Desired positions, velocities, and accelerations at one instant.

    The acceleration entry feeds metrics only; the control law never
    consumes it.
    """

    x_d: tuple
    xd_dot: tuple
    xd_ddot: tuple

    def __post_init__(self):
        object.__setattr__(self, "x_d", tuple(float(v) for v in self.x_d))
        object.__setattr__(self, "xd_dot", tuple(float(v) for v in self.xd_dot))
        object.__setattr__(self, "xd_ddot", tuple(float(v) for v in self.xd_ddot))
        for name in ("x_d", "xd_dot", "xd_ddot"):
            vals = getattr(self, name)
            if not all(np.isfinite(vals)):
                raise ValidationError(f"{name} entries must be finite")
        if not len(self.x_d) == len(self.xd_dot) == len(self.xd_ddot):
            raise DimensionMismatch("reference fields disagree on joint count")

    def arrays(self):
        return (np.asarray(self.x_d), np.asarray(self.xd_dot),
                np.asarray(self.xd_ddot))


@dataclass(frozen=True)
class ErrorState:
    """Tracking errors and transformed errors for one step.

    Identically, q1_vec == e1 and q2_vec == e2 - kappa1.
    """

    e1: np.ndarray
    e2: np.ndarray
    q1_vec: np.ndarray
    q2_vec: np.ndarray
    kappa1: np.ndarray


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def compute_errors(state, ref):
    """e1 = q - x_d and e2 = qd - xd_dot, componentwise, unfiltered."""
    q, qd = state.arrays()
    x_d, xd_dot, _ = ref.arrays()
    if q.shape != x_d.shape:
        raise DimensionMismatch(
            f"state has {q.shape[0]} joints, reference {x_d.shape[0]}")
    return q - x_d, qd - xd_dot


def virtual_control(q1_vec, gains, phi1_hat):
    """kappa1 = -1/2 (delta1 + zeta1 phi1_hat) Q1."""
    q1_vec = np.asarray(q1_vec, dtype=float)
    return -0.5 * (gains.delta1 + gains.zeta1 * phi1_hat) * q1_vec


def adaptive_step(phi_hat, q_vec, k, sigma, zeta, dt):
    """One RK4 step of phi' = -k sigma phi + 1/2 zeta k ||Q||^2.

    The positivity floor (1e-12) only engages if the discretization
    undershoots zero; at dt = 1e-4 with the documented gain ranges it
    never does.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    q_vec = np.asarray(q_vec, dtype=float)
    norm_sq = float(q_vec @ q_vec)
    out, _ = _phi_rk4_core(float(phi_hat), k * sigma,
                           0.5 * zeta * k * norm_sq, float(dt))
    return float(out)


def actual_control(q2_vec, gains, phi2_hat, bounds):
    """T_c = -1/2 (delta2 + zeta2 phi2_hat) i_min^-1 Q2."""
    q2_vec = np.asarray(q2_vec, dtype=float)
    return (-0.5 * (gains.delta2 + gains.zeta2 * phi2_hat)
            / bounds.i_min * q2_vec)


def control_step(state, ref, adaptive, gains, bounds, dt):
    """Execute one full controller update.

    Returns (T_c, new AdaptiveState, ErrorState); deterministic in its
    inputs.
    """
    q, qd = state.arrays()
    x_d, xd_dot, _ = ref.arrays()
    if q.shape != x_d.shape:
        raise DimensionMismatch(
            f"state has {q.shape[0]} joints, reference {x_d.shape[0]}")
    t_c, phi1n, phi2n, clamps, e1, e2, kappa1, q2_vec = _control_core(
        q, qd, x_d, xd_dot,
        adaptive.phi1_hat, adaptive.phi2_hat,
        gains.delta1, gains.delta2, gains.zeta1, gains.zeta2,
        gains.sigma1, gains.sigma2, gains.k1, gains.k2,
        bounds.i_min, float(dt))
    new_adaptive = AdaptiveState(phi1_hat=float(phi1n), phi2_hat=float(phi2n),
                                 clamp_count=adaptive.clamp_count + int(clamps))
    errors = ErrorState(e1=e1, e2=e2, q1_vec=e1.copy(), q2_vec=q2_vec,
                        kappa1=kappa1)
    return t_c, new_adaptive, errors
