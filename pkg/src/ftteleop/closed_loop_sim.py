"""Fixed-step integration of the coupled two-robot closed loop.

A scenario couples two manipulators through one of the controller variants,
optionally applies scripted external force profiles, and is integrated with
an explicit fixed-step scheme (forward Euler by default, classic RK4 for
step-size studies). Runs are deterministic: identical scenarios produce
bit-identical traces.

The recorded trace carries the full state, torques, forces, the inter-robot
error norm and the shaped total energy at a decimated sample interval, and
can round-trip through CSV at full float64 precision. Post-hoc monitors
check the analytic energy-decay rate against the sampled energy and build
the passive-environment energy ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controllers import (
    LOCAL,
    REMOTE,
    ControlAction,
    ControllerConfig,
    ControllerState,
    control_action,
    dissipation_rate,
    shaped_potential,
)
from .robot_dynamics import RobotParams, RobotState, energies, forward_dynamics

__all__ = [
    "ForceProfile",
    "TeleopState",
    "SimTrace",
    "Scenario",
    "SimulationUnstableError",
    "step",
    "rk4_step",
    "run",
    "convergence_time",
    "energy_audit",
    "EnergyAudit",
    "passivity_ledger",
    "PassivityLedger",
    "state_bounds_from_energy",
]


class SimulationUnstableError(RuntimeError):
    """Raised when the integrated state stops being finite.

    Usually means the step size is too large for the chosen gains; refine dt
    or soften the gains.
    """


@dataclass(frozen=True, eq=False)
class ForceProfile:
    """Scripted external force acting on one robot.

    Kinds:
        zero: no force.
        pulse: constant per-joint amplitude on [start, stop).
        spring_damper: passive environment -stiffness*(q - anchor) - damping*qd
            with nonnegative coefficients, so it can only inject the energy
            initially stored in the spring.
    """

    kind: str = "zero"
    start: float = 0.0
    stop: float = 0.0
    amplitude: np.ndarray | None = None
    stiffness: np.ndarray | None = None
    damping: np.ndarray | None = None
    anchor: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "pulse", "spring_damper"):
            raise ValueError(f"unknown force profile kind {self.kind!r}")
        for name in ("amplitude", "stiffness", "damping", "anchor"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(value, float)))
        if self.kind == "pulse":
            if self.amplitude is None:
                raise ValueError("pulse profile requires an amplitude vector")
            if not (0.0 <= self.start < self.stop):
                raise ValueError("pulse profile requires 0 <= start < stop")
        if self.kind == "spring_damper":
            if self.stiffness is None or self.anchor is None:
                raise ValueError("spring_damper profile requires stiffness and anchor")
            if np.any(self.stiffness < 0):
                raise ValueError("spring stiffness must be nonnegative (passive map)")
            if self.damping is not None and np.any(self.damping < 0):
                raise ValueError("spring damping must be nonnegative (passive map)")

    def __call__(self, t: float, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        if self.kind == "pulse" and self.start <= t < self.stop:
            return self.amplitude
        if self.kind == "spring_damper":
            f = -self.stiffness * (q - self.anchor)
            if self.damping is not None:
                f = f - self.damping * qdot
            return f
        return np.zeros_like(q)

    def spring_energy(self, q: np.ndarray) -> float:
        """Energy stored in the spring at position q (0 for other kinds)."""
        if self.kind != "spring_damper":
            return 0.0
        return float(0.5 * np.sum(self.stiffness * (np.asarray(q, float) - self.anchor) ** 2))


@dataclass(frozen=True, eq=False)
class TeleopState:
    """Full closed-loop state: both robots, virtual state if any, and time."""

    local: RobotState
    remote: RobotState
    ctrl: ControllerState | None = None
    time: float = 0.0

    def __post_init__(self):
        if self.local.q.size != self.remote.q.size:
            raise ValueError("local and remote joint counts differ")
        if self.ctrl is not None and self.ctrl.theta_l.size != self.local.q.size:
            raise ValueError("controller state dimension mismatch")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything one closed-loop run needs."""

    params_l: RobotParams
    params_r: RobotParams
    config: ControllerConfig
    q0_l: np.ndarray
    q0_r: np.ndarray
    qd0_l: np.ndarray | None = None
    qd0_r: np.ndarray | None = None
    theta0_l: np.ndarray | None = None
    theta0_r: np.ndarray | None = None
    profile_l: ForceProfile = field(default_factory=ForceProfile)
    profile_r: ForceProfile = field(default_factory=ForceProfile)
    horizon: float = 8.0
    dt: float = 1e-4
    decimation: float = 1e-3
    integrator: str = "euler"
    delay: float = 0.0
    label: str = "scenario"

    def initial_state(self) -> TeleopState:
        n = self.params_l.n
        zeros = np.zeros(n)
        q0_l = np.asarray(self.q0_l, float)
        q0_r = np.asarray(self.q0_r, float)
        ctrl = None
        if self.config.has_virtual_state:
            ctrl = ControllerState(
                theta_l=self.theta0_l if self.theta0_l is not None else q0_l,
                theta_r=self.theta0_r if self.theta0_r is not None else q0_r,
            )
        return TeleopState(
            local=RobotState(q=q0_l, qdot=self.qd0_l if self.qd0_l is not None else zeros),
            remote=RobotState(q=q0_r, qdot=self.qd0_r if self.qd0_r is not None else zeros),
            ctrl=ctrl,
            time=0.0,
        )


def _forces(profiles, state: TeleopState):
    profile_l, profile_r = profiles
    f_l = profile_l(state.time, state.local.q, state.local.qdot)
    f_r = profile_r(state.time, state.remote.q, state.remote.qdot)
    return f_l, f_r


def _accelerations(config, params_l, params_r, state: TeleopState,
                   action: ControlAction, f_l, f_r):
    acc_l = forward_dynamics(params_l, state.local, action.tau_l, f_l)
    acc_r = forward_dynamics(params_r, state.remote, action.tau_r, f_r)
    return acc_l, acc_r


def _advance_euler(state: TeleopState, action: ControlAction,
                   acc_l: np.ndarray, acc_r: np.ndarray, dt: float) -> TeleopState:
    arrays = [
        state.local.q + dt * state.local.qdot,
        state.local.qdot + dt * acc_l,
        state.remote.q + dt * state.remote.qdot,
        state.remote.qdot + dt * acc_r,
    ]
    ctrl = None
    if state.ctrl is not None:
        arrays.append(state.ctrl.theta_l + dt * action.theta_dot_l)
        arrays.append(state.ctrl.theta_r + dt * action.theta_dot_r)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise SimulationUnstableError(
            f"non-finite state after the step ending at t = {state.time + dt:.6f} s; "
            "reduce dt or soften the gains")
    if state.ctrl is not None:
        ctrl = ControllerState(theta_l=arrays[4], theta_r=arrays[5])
    return TeleopState(
        local=RobotState(q=arrays[0], qdot=arrays[1]),
        remote=RobotState(q=arrays[2], qdot=arrays[3]),
        ctrl=ctrl,
        time=state.time + dt,
    )


def step(state: TeleopState, config: ControllerConfig, params_l: RobotParams,
         params_r: RobotParams, profiles, dt: float) -> TeleopState:
    """One explicit-Euler step of the closed loop.

    Positions advance with the pre-step velocities, velocities with the
    torque-driven accelerations, and the virtual state with its rate law.
    A non-finite result raises SimulationUnstableError.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f_l, f_r = _forces(profiles, state)
    action = control_action(config, params_l, params_r, state.local, state.remote, state.ctrl)
    acc_l, acc_r = _accelerations(config, params_l, params_r, state, action, f_l, f_r)
    return _advance_euler(state, action, acc_l, acc_r, dt)


def _pack(state: TeleopState, n: int) -> np.ndarray:
    parts = [state.local.q, state.remote.q, state.local.qdot, state.remote.qdot]
    if state.ctrl is not None:
        parts += [state.ctrl.theta_l, state.ctrl.theta_r]
    return np.concatenate(parts)


def _unpack(x: np.ndarray, n: int, has_theta: bool, t: float) -> TeleopState:
    ctrl = None
    if has_theta:
        ctrl = ControllerState(theta_l=x[4 * n:5 * n], theta_r=x[5 * n:6 * n])
    return TeleopState(
        local=RobotState(q=x[0:n], qdot=x[2 * n:3 * n]),
        remote=RobotState(q=x[n:2 * n], qdot=x[3 * n:4 * n]),
        ctrl=ctrl,
        time=t,
    )


def rk4_step(state: TeleopState, config, params_l, params_r, profiles, dt: float) -> TeleopState:
    """Classic fourth-order Runge-Kutta step (for step-size studies)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = params_l.n
    has_theta = state.ctrl is not None

    def rhs(x: np.ndarray, t: float) -> np.ndarray:
        s = _unpack(x, n, has_theta, t)
        f_l, f_r = _forces(profiles, s)
        action = control_action(config, params_l, params_r, s.local, s.remote, s.ctrl)
        acc_l, acc_r = _accelerations(config, params_l, params_r, s, action, f_l, f_r)
        parts = [s.local.qdot, s.remote.qdot, acc_l, acc_r]
        if has_theta:
            parts += [action.theta_dot_l, action.theta_dot_r]
        return np.concatenate(parts)

    x0 = _pack(state, n)
    t0 = state.time
    k1 = rhs(x0, t0)
    k2 = rhs(x0 + 0.5 * dt * k1, t0 + 0.5 * dt)
    k3 = rhs(x0 + 0.5 * dt * k2, t0 + 0.5 * dt)
    k4 = rhs(x0 + dt * k3, t0 + dt)
    x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x1)):
        raise SimulationUnstableError(
            f"non-finite state after the step ending at t = {t0 + dt:.6f} s; "
            "reduce dt or soften the gains")
    return _unpack(x1, n, has_theta, t0 + dt)


@dataclass(eq=False)
class SimTrace:
    """Time-indexed record of one closed-loop run (decimated samples)."""

    t: np.ndarray
    q_l: np.ndarray
    q_r: np.ndarray
    qd_l: np.ndarray
    qd_r: np.ndarray
    th_l: np.ndarray
    th_r: np.ndarray
    tau_l: np.ndarray
    tau_r: np.ndarray
    f_l: np.ndarray
    f_r: np.ndarray
    err_norm: np.ndarray
    energy: np.ndarray
    dt: float = float("nan")

    @property
    def n(self) -> int:
        return self.q_l.shape[1]

    @property
    def samples(self) -> int:
        return self.t.size

    def header(self) -> str:
        n = self.n
        cols = ["t"]
        for stem in ("ql", "qr", "dql", "dqr", "thl", "thr", "taul", "taur", "fl", "fr"):
            cols += [f"{stem}{k + 1}" for k in range(n)]
        cols += ["err_norm", "H"]
        return ",".join(cols)

    def matrix(self) -> np.ndarray:
        return np.column_stack([
            self.t, self.q_l, self.q_r, self.qd_l, self.qd_r, self.th_l, self.th_r,
            self.tau_l, self.tau_r, self.f_l, self.f_r, self.err_norm, self.energy,
        ])

    def to_csv(self, path) -> None:
        """Write the trace with 17 significant digits for bit-faithful reload."""
        np.savetxt(path, self.matrix(), fmt="%.17g", delimiter=",",
                   header=self.header(), comments="")

    @classmethod
    def from_csv(cls, path, dt: float = float("nan")) -> "SimTrace":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = (len(header) - 3) // 10
        cuts = np.cumsum([1] + [n] * 10 + [1])
        fields = np.split(data, cuts, axis=1)
        return cls(
            t=fields[0].ravel(),
            q_l=fields[1], q_r=fields[2], qd_l=fields[3], qd_r=fields[4],
            th_l=fields[5], th_r=fields[6], tau_l=fields[7], tau_r=fields[8],
            f_l=fields[9], f_r=fields[10],
            err_norm=fields[11].ravel(), energy=fields[12].ravel(), dt=dt,
        )

    def has_forces(self) -> bool:
        return bool(np.any(self.f_l != 0.0) or np.any(self.f_r != 0.0))


def _total_energy(config, params_l, params_r, state: TeleopState) -> float:
    kin_l, _ = energies(params_l, state.local)
    kin_r, _ = energies(params_r, state.remote)
    return shaped_potential(config, state.local, state.remote, state.ctrl) + kin_l + kin_r


def _delayed_action(config, params_l, params_r, state: TeleopState,
                    q_l_delayed: np.ndarray, q_r_delayed: np.ndarray) -> ControlAction:
    """Torques when each side sees the other's position with transport delay.

    Only the exchanged position is delayed; every local quantity (own
    position, own velocity, virtual state) stays fresh. Experimental
    plumbing: none of the stability monitors account for it.
    """
    remote_view = RobotState(q=q_r_delayed, qdot=state.remote.qdot)
    local_view = RobotState(q=q_l_delayed, qdot=state.local.qdot)
    act_l = control_action(config, params_l, params_r, state.local, remote_view, state.ctrl)
    act_r = control_action(config, params_l, params_r, local_view, state.remote, state.ctrl)
    return ControlAction(tau_l=act_l.tau_l, tau_r=act_r.tau_r,
                         theta_dot_l=act_l.theta_dot_l, theta_dot_r=act_r.theta_dot_r)


def run(scenario) -> SimTrace:
    """Integrate a scenario over [0, horizon] and record the decimated trace.

    Raises SimulationUnstableError with the offending time if the state
    leaves the finite range.
    """
    config: ControllerConfig = scenario.config
    params_l, params_r = scenario.params_l, scenario.params_r
    n = params_l.n
    dt = float(scenario.dt)
    steps = int(round(scenario.horizon / dt))
    every = max(1, int(round(scenario.decimation / dt)))
    profiles = (scenario.profile_l, scenario.profile_r)

    delay_steps = int(round(scenario.delay / dt)) if scenario.delay else 0
    if delay_steps > 0 and scenario.integrator != "euler":
        raise ValueError("the transport-delay option is supported with the euler integrator only")
    history_l: list[np.ndarray] = []
    history_r: list[np.ndarray] = []

    state = scenario.initial_state()
    records = []
    for k in range(steps + 1):
        f_l, f_r = _forces(profiles, state)
        if delay_steps > 0:
            history_l.append(state.local.q)
            history_r.append(state.remote.q)
            j = max(0, k - delay_steps)
            action = _delayed_action(config, params_l, params_r, state,
                                     history_l[j], history_r[j])
        else:
            action = control_action(config, params_l, params_r,
                                    state.local, state.remote, state.ctrl)

        if k % every == 0 or k == steps:
            records.append((
                state.time, state.local.q, state.remote.q,
                state.local.qdot, state.remote.qdot,
                state.ctrl.theta_l if state.ctrl else np.full(n, np.nan),
                state.ctrl.theta_r if state.ctrl else np.full(n, np.nan),
                action.tau_l, action.tau_r, f_l, f_r,
                float(np.linalg.norm(state.local.q - state.remote.q)),
                _total_energy(config, params_l, params_r, state),
            ))
        if k == steps:
            break

        if scenario.integrator == "rk4":
            state = rk4_step(state, config, params_l, params_r, profiles, dt)
        else:
            acc_l, acc_r = _accelerations(config, params_l, params_r, state, action, f_l, f_r)
            state = _advance_euler(state, action, acc_l, acc_r, dt)

    cols = list(zip(*records))
    return SimTrace(
        t=np.array(cols[0]),
        q_l=np.array(cols[1]), q_r=np.array(cols[2]),
        qd_l=np.array(cols[3]), qd_r=np.array(cols[4]),
        th_l=np.array(cols[5]), th_r=np.array(cols[6]),
        tau_l=np.array(cols[7]), tau_r=np.array(cols[8]),
        f_l=np.array(cols[9]), f_r=np.array(cols[10]),
        err_norm=np.array(cols[11]), energy=np.array(cols[12]),
        dt=dt,
    )


def convergence_time(trace: SimTrace, tol: float):
    """First recorded time after which the error norm stays below tol.

    Returns None when the error is not sustained below tol through the end
    of the trace (a transient dip does not count).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if trace.samples == 0:
        raise ValueError("empty trace")
    above = trace.err_norm >= tol
    if above[-1]:
        return None
    idx = np.flatnonzero(above)
    if idx.size == 0:
        return float(trace.t[0])
    return float(trace.t[idx[-1] + 1])


@dataclass(frozen=True)
class EnergyAudit:
    """Sampled total energy against its analytic decay rate (free motion)."""

    t: np.ndarray
    energy: np.ndarray
    hdot_analytic: np.ndarray       # per sample, always <= 0 in exact arithmetic
    hdot_numeric: np.ndarray        # forward difference, one shorter
    step_increase_tol: float
    flagged: np.ndarray             # sample indices violating either check

    @property
    def max_step_increase(self) -> float:
        return float(np.max(np.maximum(np.diff(self.energy), 0.0), initial=0.0))

    @property
    def positive_variation(self) -> float:
        return float(np.sum(np.maximum(np.diff(self.energy), 0.0)))

    @property
    def ok(self) -> bool:
        return self.flagged.size == 0


def energy_audit(trace: SimTrace, config: ControllerConfig,
                 params_l: RobotParams, params_r: RobotParams,
                 step_increase_tol: float | None = None) -> EnergyAudit:
    """Check the free-motion energy decrease on a recorded trace.

    Refuses traces with nonzero external forces (the monotone decrease is
    only claimed in free motion). The analytic rate is rebuilt per sample
    from the recorded state; the numeric rate differences the sampled
    energy. Samples are flagged when the analytic rate turns positive or
    the sampled energy rises by more than the discretization tolerance,
    which defaults to 0.5 dt max(1, H(0)) per recorded interval: linear in
    dt (so it halves with the step) yet far below the rise a sign error in
    the dissipation would cause.
    """
    if trace.has_forces():
        raise ValueError("energy audit requires a free-motion trace (all forces zero)")
    hdot = np.empty(trace.samples)
    for i in range(trace.samples):
        state_l = RobotState(q=trace.q_l[i], qdot=trace.qd_l[i])
        state_r = RobotState(q=trace.q_r[i], qdot=trace.qd_r[i])
        ctrl = None
        if config.has_virtual_state:
            ctrl = ControllerState(theta_l=trace.th_l[i], theta_r=trace.th_r[i])
        hdot[i] = dissipation_rate(config, state_l, state_r, ctrl)
    hdot_numeric = np.diff(trace.energy) / np.diff(trace.t)
    dt = trace.dt if math.isfinite(trace.dt) else float(np.min(np.diff(trace.t)))
    if step_increase_tol is None:
        step_increase_tol = 0.5 * dt * max(1.0, abs(float(trace.energy[0])))
    rising = np.flatnonzero(np.diff(trace.energy) > step_increase_tol)
    positive = np.flatnonzero(hdot > 0.0)
    return EnergyAudit(
        t=trace.t,
        energy=trace.energy,
        hdot_analytic=hdot,
        hdot_numeric=hdot_numeric,
        step_increase_tol=step_increase_tol,
        flagged=np.union1d(rising, positive),
    )


@dataclass(frozen=True)
class PassivityLedger:
    """Per-robot injected-energy ledger for the external force channels.

    work[i] is the running integral of qd^T f for robot i (trapezoidal);
    kappa[i] is the smallest budget that keeps the ledger
    kappa[i] - work[i](t) nonnegative over the whole trace.
    """

    t: np.ndarray
    work: np.ndarray    # (2, samples)
    kappa: np.ndarray   # (2,)

    def ledger(self, side: int) -> np.ndarray:
        return self.kappa[side] - self.work[side]

    @property
    def total_budget(self) -> float:
        return float(self.kappa.sum())


def passivity_ledger(trace: SimTrace) -> PassivityLedger:
    work = np.zeros((2, trace.samples))
    for side, (qd, f) in enumerate(((trace.qd_l, trace.f_l), (trace.qd_r, trace.f_r))):
        power = np.sum(qd * f, axis=1)
        mids = 0.5 * (power[1:] + power[:-1]) * np.diff(trace.t)
        work[side, 1:] = np.cumsum(mids)
    kappa = np.maximum(work.max(axis=1), 0.0)
    return PassivityLedger(t=trace.t, work=work, kappa=kappa)


def state_bounds_from_energy(config: ControllerConfig, params_l: RobotParams,
                             params_r: RobotParams, budget: float) -> dict:
    """State bounds implied by a total-energy budget.

    Every term of the shaped energy is nonnegative, so each one is
    individually capped by the budget; inverting the term gives a bound on
    the corresponding coordinate. Returns the error-norm cap, per-robot
    velocity-norm caps, and virtual-mismatch-norm caps (C2/C4 only).
    """
    if budget < 0:
        raise ValueError("energy budget must be nonnegative")
    p = config.p_pos

    def invert_power(gains: np.ndarray) -> float:
        per_joint = ((p + 1.0) * budget / gains) ** (1.0 / (p + 1.0))
        return float(np.linalg.norm(per_joint))

    def invert_s(gains: np.ndarray, delta: float) -> float:
        # the kernel exceeds delta^p |x| / (p+1) beyond delta, so either the
        # unsaturated inversion holds or the affine branch caps |x|
        unsat = ((p + 1.0) * budget / gains) ** (1.0 / (p + 1.0))
        sat = (budget / gains + p / (p + 1.0) * delta ** (p + 1.0)) / delta**p
        return float(np.linalg.norm(np.maximum(unsat, sat)))

    if config.is_bounded:
        err_cap = invert_s(config.k_s, config.delta_p)
    else:
        err_cap = invert_power(config.k_s)

    vel_caps = (
        math.sqrt(2.0 * budget / params_l.bounds.inertia_min),
        math.sqrt(2.0 * budget / params_r.bounds.inertia_min),
    )
    theta_caps = None
    if config.has_virtual_state:
        caps = []
        for side in (LOCAL, REMOTE):
            if config.is_bounded:
                caps.append(invert_s(config.k_c[side], config.delta_d))
            else:
                caps.append(invert_power(config.k_c[side]))
        theta_caps = tuple(caps)
    return {"err_norm": err_cap, "vel_norm": vel_caps, "theta_err_norm": theta_caps}
