"""Euler-Lagrange dynamics of a planar n-link serial manipulator.

The model is the standard planar chain of revolute joints: link k is a point
mass m_k at distance lc_k along the link, plus a rotor inertia I_k about the
joint axis, with link length l_k connecting to the next joint. Gravity acts
in-plane along -y (set the acceleration to 0 for a horizontal workspace).

With absolute link angles phi = L q (L the lower-triangular matrix of ones),
the inertia matrix factors as M(q) = L^T A(phi) L where
A_ab = W_ab cos(phi_a - phi_b) + delta_ab I_a and W is a constant geometry
matrix. This gives closed-form M, its configuration gradient, the Coriolis
matrix from Christoffel symbols of the first kind, and the gravity vector,
for any joint count.

Inertia eigenvalue bounds, the Coriolis quadratic-growth constant and the
per-joint gravity caps are estimated once per parameter set by dense sampling
of the configuration torus with a safety margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "RobotParams",
    "RobotState",
    "DerivedBounds",
    "SingularInertiaError",
    "mass_matrix",
    "coriolis_matrix",
    "gravity_vector",
    "potential_energy",
    "forward_dynamics",
    "energies",
    "derive_bounds",
]

# configuration grid budget and safety margin for the sampled bounds
_BOUND_GRID_TARGET = 10_000
_BOUND_MARGIN = 1.05
_MAX_CONDITION = 1e12


class SingularInertiaError(RuntimeError):
    """Raised when the inertia matrix cannot be factorized as SPD.

    A valid parameter set keeps the inertia matrix uniformly positive
    definite, so this signals corrupted or inconsistent robot parameters.
    """


@dataclass(frozen=True)
class DerivedBounds:
    """Sampled model bounds: inertia eigenvalue range, Coriolis growth
    constant (||C(q, v) v|| <= coriolis_gain ||v||^2) and per-joint caps on
    the gravity torque magnitude."""

    inertia_min: float
    inertia_max: float
    coriolis_gain: float
    gravity_caps: np.ndarray


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RobotParams:
    """Physical description of one planar serial manipulator.

    Attributes:
        masses: link masses [kg], length n.
        lengths: joint-to-joint link lengths [m].
        com_offsets: distance from each joint to the link's mass center [m].
        inertias: rotor inertia of each link about its joint axis [kg m^2].
        gravity: in-plane gravitational acceleration [m/s^2]; 0 means the
            chain moves in a horizontal plane.
        torque_limits: per-joint actuator bounds [N m], or None if unlimited.
    """

    masses: np.ndarray
    lengths: np.ndarray
    com_offsets: np.ndarray
    inertias: np.ndarray
    gravity: float = 9.81
    torque_limits: np.ndarray | None = None
    bounds: DerivedBounds = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("masses", "lengths", "com_offsets", "inertias"):
            object.__setattr__(self, name, _readonly(np.atleast_1d(getattr(self, name))))
        object.__setattr__(self, "gravity", float(self.gravity))
        if self.torque_limits is not None:
            object.__setattr__(self, "torque_limits", _readonly(np.atleast_1d(self.torque_limits)))

        n = self.masses.size
        problems = []
        for name in ("lengths", "com_offsets", "inertias"):
            if getattr(self, name).size != n:
                problems.append(f"{name} must have length {n}")
        if n < 1:
            problems.append("at least one joint is required")
        if np.any(self.masses <= 0):
            problems.append("masses must be positive")
        if not problems:
            if np.any(self.lengths <= 0):
                problems.append("lengths must be positive")
            if np.any(self.com_offsets <= 0) or np.any(self.com_offsets > self.lengths):
                problems.append("com_offsets must lie in (0, length] for each link")
            if np.any(self.inertias < 0):
                problems.append("inertias must be nonnegative")
            if not np.isfinite(self.gravity) or self.gravity < 0:
                problems.append("gravity must be a nonnegative real")
            if self.torque_limits is not None:
                if self.torque_limits.size != n:
                    problems.append(f"torque_limits must have length {n}")
                elif np.any(self.torque_limits <= 0):
                    problems.append("torque_limits must be positive")
        if problems:
            raise ValueError("invalid robot parameters: " + "; ".join(problems))

        # chain geometry: lever[k, j] is the lever arm of joint j for link k's
        # mass center (l_j upstream, lc_k on the link itself, 0 downstream)
        lever = np.zeros((n, n))
        for k in range(n):
            lever[k, :k] = self.lengths[:k]
            lever[k, k] = self.com_offsets[k]
        weight_matrix = np.einsum("k,ka,kb->ab", self.masses, lever, lever)
        gravity_weights = self.masses @ lever
        lower = np.tril(np.ones((n, n)))
        object.__setattr__(self, "_lever", _readonly(lever))
        object.__setattr__(self, "_weight_matrix", _readonly(weight_matrix))
        object.__setattr__(self, "_gravity_weights", _readonly(gravity_weights))
        object.__setattr__(self, "_lower", _readonly(lower))

        object.__setattr__(self, "bounds", derive_bounds(self))
        if self.bounds.inertia_max / self.bounds.inertia_min > _MAX_CONDITION:
            raise ValueError(
                "inertia matrix is numerically singular somewhere on the "
                f"configuration torus (condition > {_MAX_CONDITION:.0e})"
            )
        if self.torque_limits is not None:
            short = self.torque_limits <= self.bounds.gravity_caps
            if np.any(short):
                bad = np.flatnonzero(short) + 1
                raise ValueError(
                    "torque limit must exceed the gravity cap so each actuator "
                    f"can hold its own link weight; violated at joint(s) {bad.tolist()}"
                )

    @property
    def n(self) -> int:
        return self.masses.size


@dataclass(frozen=True, eq=False)
class RobotState:
    """Joint positions [rad] and velocities [rad/s] of one robot."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "qdot", np.atleast_1d(np.asarray(self.qdot, dtype=float)))
        if self.q.shape != self.qdot.shape or self.q.ndim != 1:
            raise ValueError("q and qdot must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("robot state must be finite")


def _check_q(params: RobotParams, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (params.n,):
        raise ValueError(f"expected {params.n} joint values, got shape {q.shape}")
    return q


def mass_matrix(params: RobotParams, q) -> np.ndarray:
    """Symmetric positive-definite joint-space inertia matrix M(q)."""
    q = _check_q(params, q)
    lo = params._lower
    phi = lo @ q
    c, s = np.cos(phi), np.sin(phi)
    a = params._weight_matrix * (np.outer(c, c) + np.outer(s, s)) + np.diag(params.inertias)
    m = lo.T @ a @ lo
    return 0.5 * (m + m.T)  # kill rounding asymmetry from the matmuls


def _mass_gradient(params: RobotParams, q) -> np.ndarray:
    """dM[k] = dM/dq_k, shape (n, n, n)."""
    lo = params._lower
    phi = lo @ q
    c, s = np.cos(phi), np.sin(phi)
    sin_diff = np.outer(s, c) - np.outer(c, s)  # sin(phi_a - phi_b)
    # reach[k, a, b] = 1 if joint k moves phi_a, minus the same for phi_b
    reach = lo.T[:, :, None] - lo.T[:, None, :]
    da = -(params._weight_matrix * sin_diff)[None, :, :] * reach
    dm = np.einsum("ak,cab,bj->ckj", lo, da, lo)
    return 0.5 * (dm + np.einsum("ckj->cjk", dm))


def coriolis_matrix(params: RobotParams, q, qdot) -> np.ndarray:
    """Coriolis/centrifugal matrix from Christoffel symbols of the first kind.

    Built from the analytic configuration gradient of M, so dM/dt - 2C is
    skew-symmetric and C(q, v) v grows at most quadratically in v.
    """
    q = _check_q(params, q)
    qdot = _check_q(params, qdot)
    dm = _mass_gradient(params, q)
    t1 = np.einsum("i,ikj->kj", qdot, dm)
    t2 = np.einsum("i,jki->kj", qdot, dm)
    t3 = np.einsum("i,kij->kj", qdot, dm)
    return 0.5 * (t1 + t2 - t3)


def potential_energy(params: RobotParams, q) -> float:
    """Gravitational potential energy [J], zero with all links horizontal."""
    q = _check_q(params, q)
    phi = params._lower @ q
    return float(params.gravity * params._gravity_weights @ np.sin(phi))


def gravity_vector(params: RobotParams, q) -> np.ndarray:
    """Configuration gradient of the potential energy (gravity torque)."""
    q = _check_q(params, q)
    lo = params._lower
    phi = lo @ q
    return params.gravity * (lo.T @ (params._gravity_weights * np.cos(phi)))


def forward_dynamics(params: RobotParams, state: RobotState, tau, f_ext=None) -> np.ndarray:
    """Joint accelerations from the equations of motion.

    Solves M(q) qdd = tau + f_ext - C(q, qd) qd - gravity(q) with an SPD
    Cholesky factorization.
    """
    tau = _check_q(params, tau)
    rhs = tau - coriolis_matrix(params, state.q, state.qdot) @ state.qdot
    rhs -= gravity_vector(params, state.q)
    if f_ext is not None:
        rhs = rhs + _check_q(params, f_ext)
    m = mass_matrix(params, state.q)
    try:
        factor = cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularInertiaError(
            "inertia matrix is not positive definite; robot parameters are corrupted"
        ) from exc
    return cho_solve(factor, rhs, check_finite=False)


def energies(params: RobotParams, state: RobotState) -> tuple[float, float]:
    """(kinetic, potential) energy of the robot in its current state [J]."""
    kinetic = 0.5 * state.qdot @ (mass_matrix(params, state.q) @ state.qdot)
    return float(kinetic), potential_energy(params, state.q)


# --- sampled bounds -------------------------------------------------------


def _batch_phi_trig(params: RobotParams, q_grid: np.ndarray):
    phi = q_grid @ params._lower.T
    return np.cos(phi), np.sin(phi)


def _batch_mass(params: RobotParams, q_grid: np.ndarray) -> np.ndarray:
    c, s = _batch_phi_trig(params, q_grid)
    a = params._weight_matrix[None] * (
        np.einsum("na,nb->nab", c, c) + np.einsum("na,nb->nab", s, s)
    )
    a += np.diag(params.inertias)[None]
    lo = params._lower
    return np.einsum("ak,nab,bj->nkj", lo, a, lo)


def _batch_mass_gradient(params: RobotParams, q_grid: np.ndarray) -> np.ndarray:
    c, s = _batch_phi_trig(params, q_grid)
    sin_diff = np.einsum("na,nb->nab", s, c) - np.einsum("na,nb->nab", c, s)
    lo = params._lower
    reach = lo.T[:, :, None] - lo.T[:, None, :]
    da = -(params._weight_matrix[None, None] * sin_diff[:, None]) * reach[None]
    return np.einsum("ak,ncab,bj->nckj", lo, da, lo)


def _christoffel_growth(params: RobotParams, q_grid: np.ndarray) -> np.ndarray:
    """Per-sample bound on ||C(q, v) v|| / ||v||^2.

    [C(q, v) v]_k is the quadratic form v^T G_k(q) v; the bound is the root
    sum of squares of the symmetrized forms' spectral radii.
    """
    dm = _batch_mass_gradient(params, q_grid)
    # gamma[n, k, i, j]: Christoffel symbol of the first kind for output row k
    gamma = 0.5 * (
        np.einsum("nikj->nkij", dm) + np.einsum("njki->nkij", dm) - dm
    )
    sym = 0.5 * (gamma + np.transpose(gamma, (0, 1, 3, 2)))
    eigs = np.linalg.eigvalsh(sym)
    radii = np.max(np.abs(eigs), axis=-1)
    return np.sqrt(np.sum(radii**2, axis=-1))


def _configuration_grid(n: int, target: int) -> np.ndarray:
    per_joint = max(2, int(np.ceil(target ** (1.0 / n))))
    axis = np.linspace(-np.pi, np.pi, per_joint, endpoint=False)
    grid = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


def derive_bounds(params: RobotParams, grid_target: int = _BOUND_GRID_TARGET) -> DerivedBounds:
    """Estimate model bounds by dense sampling of the configuration torus.

    All quantities are periodic in the absolute link angles, so a uniform
    grid over [-pi, pi)^n covers the reachable set. Extremes carry a x1.05
    margin (skipped when the quantity is configuration-independent, e.g. a
    single pendulum's constant inertia).
    """
    grid = _configuration_grid(params.n, grid_target)
    chunk = 2048
    lam_min, lam_max, growth_max = np.inf, -np.inf, 0.0
    grav_max = np.zeros(params.n)
    lo = params._lower
    for start in range(0, grid.shape[0], chunk):
        q_block = grid[start : start + chunk]
        eigs = np.linalg.eigvalsh(_batch_mass(params, q_block))
        lam_min = min(lam_min, float(eigs[:, 0].min()))
        lam_max = max(lam_max, float(eigs[:, -1].max()))
        growth_max = max(growth_max, float(_christoffel_growth(params, q_block).max()))
        c, _ = _batch_phi_trig(params, q_block)
        grav = params.gravity * (c * params._gravity_weights) @ lo
        grav_max = np.maximum(grav_max, np.abs(grav).max(axis=0))

    if lam_max - lam_min < 1e-12 * lam_max:
        inertia_min = inertia_max = lam_max
    else:
        inertia_min = lam_min / _BOUND_MARGIN
        inertia_max = lam_max * _BOUND_MARGIN
    return DerivedBounds(
        inertia_min=inertia_min,
        inertia_max=inertia_max,
        coriolis_gain=growth_max * _BOUND_MARGIN,
        gravity_caps=_readonly(grav_max * _BOUND_MARGIN),
    )
