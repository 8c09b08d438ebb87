"""Rigid-body model of an n-DoF planar manipulator.

The chain lives in a vertical plane: joint angles ``q`` are relative, link
``i``'s absolute angle is ``alpha_i = q_0 + ... + q_i`` measured from the
horizontal +x axis, and gravity pulls along -y with magnitude
``params.gravity``.  All terms (inertia, Coriolis via Christoffel symbols,
gravity, viscous friction) are assembled analytically for any joint count;
the 2-link closed form is recovered exactly and serves as the test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import maybe_jit
from .errors import DimensionMismatch, SingularInertia, ValidationError

__all__ = [
    "ManipulatorParams",
    "JointState",
    "InertiaBounds",
    "reference_params",
    "inertia_matrix",
    "coriolis_matrix",
    "gravity_vector",
    "forward_dynamics",
    "mechanical_energy",
    "estimate_inertia_bounds",
]


# --------------------------------------------------------------------------
# numerical cores (numba-compiled when available)
# --------------------------------------------------------------------------

@maybe_jit
def _abs_angles(q):
    n = q.shape[0]
    alpha = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc += q[i]
        alpha[i] = acc
    return alpha


@maybe_jit
def _link_suffixes(lengths, coms, alpha, i):
    """Suffix sums w_a = d p_i/d q_a (perp direction) and v_a (radial).

    d_k = lengths[k] for k < i and coms[i] for k = i; then
    w_a = sum_{k=a..i} d_k * (-sin a_k, cos a_k)  and
    v_a = sum_{k=a..i} d_k * ( cos a_k, sin a_k).
    """
    wx = np.zeros(i + 1)
    wy = np.zeros(i + 1)
    vx = np.zeros(i + 1)
    vy = np.zeros(i + 1)
    accwx = 0.0
    accwy = 0.0
    accvx = 0.0
    accvy = 0.0
    for a in range(i, -1, -1):
        d = coms[i] if a == i else lengths[a]
        ca = np.cos(alpha[a])
        sa = np.sin(alpha[a])
        accwx += -d * sa
        accwy += d * ca
        accvx += d * ca
        accvy += d * sa
        wx[a] = accwx
        wy[a] = accwy
        vx[a] = accvx
        vy[a] = accvy
    return wx, wy, vx, vy


@maybe_jit
def _mass_core(lengths, masses, coms, inertias, q):
    n = q.shape[0]
    alpha = _abs_angles(q)
    M = np.zeros((n, n))
    for i in range(n):
        wx, wy, vx, vy = _link_suffixes(lengths, coms, alpha, i)
        mi = masses[i]
        Ii = inertias[i]
        for a in range(i + 1):
            for b in range(i + 1):
                M[a, b] += Ii + mi * (wx[a] * wx[b] + wy[a] * wy[b])
    return M


@maybe_jit
def _dmass_core(lengths, masses, coms, inertias, q):
    """Tensor T[a, b, c] = d M[a, b] / d q_c (analytic)."""
    n = q.shape[0]
    alpha = _abs_angles(q)
    T = np.zeros((n, n, n))
    for i in range(n):
        wx, wy, vx, vy = _link_suffixes(lengths, coms, alpha, i)
        mi = masses[i]
        for a in range(i + 1):
            for b in range(i + 1):
                for c in range(i + 1):
                    # d w_a / d q_c = -v_{max(a, c)}
                    ka = a if a > c else c
                    kb = b if b > c else c
                    T[a, b, c] += mi * (
                        -(vx[ka] * wx[b] + vy[ka] * wy[b])
                        - (wx[a] * vx[kb] + wy[a] * vy[kb])
                    )
    return T


@maybe_jit
def _coriolis_core(lengths, masses, coms, inertias, q, qd):
    n = q.shape[0]
    T = _dmass_core(lengths, masses, coms, inertias, q)
    C = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for c in range(n):
                acc += 0.5 * (T[a, b, c] + T[a, c, b] - T[b, c, a]) * qd[c]
            C[a, b] = acc
    return C


@maybe_jit
def _gravity_core(lengths, masses, coms, gravity, q):
    n = q.shape[0]
    alpha = _abs_angles(q)
    G = np.zeros(n)
    for i in range(n):
        wx, wy, vx, vy = _link_suffixes(lengths, coms, alpha, i)
        for a in range(i + 1):
            # d y_i / d q_a = sum_{k=a..i} d_k cos(alpha_k) = vx[a]
            G[a] += gravity * masses[i] * vx[a]
    return G


@maybe_jit
def _potential_core(lengths, masses, coms, gravity, q):
    n = q.shape[0]
    alpha = _abs_angles(q)
    pot = 0.0
    base_y = 0.0
    for i in range(n):
        y_com = base_y + coms[i] * np.sin(alpha[i])
        pot += gravity * masses[i] * y_com
        base_y += lengths[i] * np.sin(alpha[i])
    return pot


@maybe_jit
def _chol_solve(M, rhs):
    """Cholesky solve with explicit pivot check.

    Returns (x, ok); ok is False when a pivot drops below 1e-12.
    """
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s < 1e-12:
            return np.zeros(n), False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            t = M[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    y = np.zeros(n)
    for i in range(n):
        t = rhs[i]
        for k in range(i):
            t -= L[i, k] * y[k]
        y[i] = t / L[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        t = y[i]
        for k in range(i + 1, n):
            t -= L[k, i] * x[k]
        x[i] = t / L[i, i]
    return x, True


@maybe_jit
def _forward_core(lengths, masses, coms, inertias, gravity, viscous,
                  q, qd, tau_eff, tau_ext):
    n = q.shape[0]
    M = _mass_core(lengths, masses, coms, inertias, q)
    C = _coriolis_core(lengths, masses, coms, inertias, q, qd)
    G = _gravity_core(lengths, masses, coms, gravity, q)
    rhs = np.empty(n)
    for a in range(n):
        cv = 0.0
        for b in range(n):
            cv += C[a, b] * qd[b]
        rhs[a] = tau_eff[a] + tau_ext[a] - cv - viscous[a] * qd[a] - G[a]
    return _chol_solve(M, rhs)


# --------------------------------------------------------------------------
# public types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ManipulatorParams:
    """Physical description of the arm; all per-link fields have length n."""

    n: int
    link_lengths: tuple
    link_masses: tuple
    link_inertias: tuple
    com_offsets: tuple
    gravity: float = 9.81
    viscous_friction: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"joint count must be >= 1, got {self.n}")
        fric = self.viscous_friction or tuple(0.0 for _ in range(self.n))
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        object.__setattr__(self, "link_masses", tuple(float(v) for v in self.link_masses))
        object.__setattr__(self, "link_inertias", tuple(float(v) for v in self.link_inertias))
        object.__setattr__(self, "com_offsets", tuple(float(v) for v in self.com_offsets))
        object.__setattr__(self, "gravity", float(self.gravity))
        object.__setattr__(self, "viscous_friction", tuple(float(v) for v in fric))
        for name in ("link_lengths", "link_masses", "link_inertias",
                     "com_offsets", "viscous_friction"):
            if len(getattr(self, name)) != self.n:
                raise ValidationError(
                    f"{name} must have {self.n} entries, got {len(getattr(self, name))}")
        for name in ("link_lengths", "link_masses", "link_inertias"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ValidationError(f"{name} entries must be strictly positive")
        for r, l in zip(self.com_offsets, self.link_lengths):
            if not 0.0 <= r <= l:
                raise ValidationError(
                    f"com offset {r} outside [0, {l}]")
        if any(v < 0 for v in self.viscous_friction):
            raise ValidationError("viscous_friction entries must be >= 0")

    def arrays(self):
        return (np.asarray(self.link_lengths), np.asarray(self.link_masses),
                np.asarray(self.com_offsets), np.asarray(self.link_inertias),
                float(self.gravity), np.asarray(self.viscous_friction))


@dataclass(frozen=True)
class JointState:
    """Joint positions and velocities; rejects non-finite entries."""

    q: tuple
    qd: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in np.atleast_1d(self.q))
        qd = tuple(float(v) for v in np.atleast_1d(self.qd))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)
        if len(q) != len(qd):
            raise DimensionMismatch(f"q has {len(q)} entries, qd has {len(qd)}")
        if not all(np.isfinite(q)) or not all(np.isfinite(qd)):
            raise ValidationError("joint state entries must be finite")

    @property
    def n(self):
        return len(self.q)

    def arrays(self):
        return np.asarray(self.q), np.asarray(self.qd)


@dataclass(frozen=True)
class InertiaBounds:
    """Eigenvalue bounds of the inverse inertia matrix."""

    i_min: float
    i_max: float

    def __post_init__(self):
        if not 0.0 < self.i_min <= self.i_max:
            raise ValidationError(
                f"need 0 < i_min <= i_max, got ({self.i_min}, {self.i_max})")


def reference_params():
    """Default 2-link arm: 1 m / 0.8 m links, mid-link COMs, rod inertias."""
    lengths = (1.0, 0.8)
    masses = (1.0, 0.8)
    return ManipulatorParams(
        n=2,
        link_lengths=lengths,
        link_masses=masses,
        link_inertias=tuple(m * l * l / 12.0 for m, l in zip(masses, lengths)),
        com_offsets=tuple(l / 2.0 for l in lengths),
        gravity=9.81,
        viscous_friction=(0.0, 0.0),
    )


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def _check_vec(params, v, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape[0] != params.n:
        raise DimensionMismatch(
            f"{name} has {arr.shape[0]} entries, expected {params.n}")
    return arr


def inertia_matrix(params, q):
    """Symmetric positive-definite joint-space inertia matrix."""
    q = _check_vec(params, q, "q")
    L, m, r, I, _, _ = params.arrays()
    return _mass_core(L, m, r, I, q)


def coriolis_matrix(params, q, qd):
    """Coriolis/centrifugal matrix from Christoffel symbols.

    The factorization makes dM/dt - 2*C skew-symmetric along trajectories.
    """
    q = _check_vec(params, q, "q")
    qd = _check_vec(params, qd, "qd")
    L, m, r, I, _, _ = params.arrays()
    return _coriolis_core(L, m, r, I, q, qd)


def gravity_vector(params, q):
    """Gradient of gravitational potential energy w.r.t. q."""
    q = _check_vec(params, q, "q")
    L, m, r, I, g, _ = params.arrays()
    return _gravity_core(L, m, r, g, q)


def forward_dynamics(params, state, tau_effective, tau_external):
    """Joint accelerations for the given effective + external torques."""
    q, qd = state.arrays()
    if state.n != params.n:
        raise DimensionMismatch(
            f"state has {state.n} joints, params expect {params.n}")
    tau_eff = _check_vec(params, tau_effective, "tau_effective")
    tau_ext = _check_vec(params, tau_external, "tau_external")
    L, m, r, I, g, visc = params.arrays()
    qdd, ok = _forward_core(L, m, r, I, g, visc, q, qd, tau_eff, tau_ext)
    if not ok:
        raise SingularInertia("inertia solve pivot below 1e-12")
    return qdd


def mechanical_energy(params, state):
    """Total kinetic + gravitational potential energy of the chain."""
    q, qd = state.arrays()
    L, m, r, I, g, _ = params.arrays()
    Mq = _mass_core(L, m, r, I, q)
    kinetic = 0.5 * float(qd @ Mq @ qd)
    potential = _potential_core(L, m, r, g, q)
    return kinetic + potential


def estimate_inertia_bounds(params, samples=64):
    """Eigenvalue bounds of M(q)^-1 over a workspace grid with safety margins.

    The planar chain's inertia matrix is independent of the base joint angle,
    so the grid covers the remaining shape coordinates, each over [0, 2*pi).
    i_min gets a 0.9 factor, i_max a 1.1 factor; for every grid sample q the
    eigenvalues of M(q)^-1 then lie inside [i_min, i_max] by construction.
    """
    if samples < 64:
        raise ValidationError(f"workspace grid needs >= 64 samples, got {samples}")
    L, m, r, I, _, _ = params.arrays()
    shape_coords = max(params.n - 1, 0)
    lo = np.inf
    hi = -np.inf
    if shape_coords == 0:
        grid = [()]
    else:
        axis = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
        mesh = np.meshgrid(*([axis] * shape_coords), indexing="ij")
        grid = np.stack([ax.ravel() for ax in mesh], axis=-1)
    for shape_q in grid:
        q = np.zeros(params.n)
        q[1:] = shape_q
        eig = np.linalg.eigvalsh(_mass_core(L, m, r, I, q))
        lo = min(lo, 1.0 / eig[-1])
        hi = max(hi, 1.0 / eig[0])
    return InertiaBounds(i_min=0.9 * lo, i_max=1.1 * hi)
