"""The four energy-shaping teleoperation control laws.

All variants shape the coupled system's potential energy around the
zero-position-error manifold and inject dissipation, cancelling each robot's
own gravity torque exactly:

    C1  state feedback:     tau_i = -k_s o |e|^p_pos - d_s,i o |qd_i|^p_vel + grav_i
    C2  output feedback:    damping enters through a virtual state theta_i
                            driven toward q_i; no velocity appears anywhere.
    C3  bounded C1:         both terms pass through the saturated power, so
                            each joint torque (net of gravity) is capped.
    C4  bounded C2:         saturated proportional and virtual-state terms.

Here e = q_i - q_j is the inter-robot position error, o is element-wise gain
application (per-joint gain vectors; scalars broadcast), and the exponents
p_pos, p_vel derive from the homogeneity weight pair. Signed powers are
written |x|^p as shorthand for the odd function signed_pow.

C1/C3 read measured velocities directly; C2/C4 integrate the virtual state
theta (by convention initialized at the robot's starting position).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .robot_dynamics import RobotParams, RobotState, gravity_vector
from .scalar_ops import Weights, s_integral, sat_pow, signed_pow

__all__ = [
    "VARIANTS",
    "LOCAL",
    "REMOTE",
    "ControllerConfig",
    "ControllerState",
    "ControlAction",
    "SaturationReport",
    "derive_exponents",
    "c1_torques",
    "c2_torques_and_theta_dot",
    "c3_torques",
    "c4_torques_and_theta_dot",
    "control_action",
    "theta_rate",
    "shaped_potential",
    "dissipation_rate",
    "validate_saturation",
]

VARIANTS = ("C1", "C2", "C3", "C4")
LOCAL, REMOTE = 0, 1


def derive_exponents(weights: Weights) -> tuple[float, float]:
    """Exponent pair (position-like, velocity-like) from the weight pair.

    Both lie in (0, 1) in the finite-time regime r1 > r2 and equal 1 when
    r1 = r2. Inadmissible weight pairs are rejected by Weights itself.
    """
    return weights.pos_exponent, weights.vel_exponent


def _per_robot_gain(value, n: int, name: str, allow_zero: bool = False) -> np.ndarray:
    """Normalize a gain spec to a (2, n) array of per-robot per-joint values.

    Accepts a scalar or a length-n vector (applied to both robots), or an
    explicit (2, n) array with rows (local, remote).
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and arr.size == 1:
        arr = arr[0]
    if arr.ndim == 0:
        out = np.full((2, n), float(arr))
    elif arr.ndim == 1 and arr.size == n:
        out = np.tile(arr, (2, 1))
    elif arr.ndim == 2 and arr.shape == (2, n):
        out = arr.copy()
    elif arr.ndim == 2 and arr.shape == (2, 1):
        out = np.repeat(arr, n, axis=1)
    else:
        raise ValueError(f"{name}: cannot interpret shape {arr.shape} for {n} joints")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    if allow_zero:
        if np.any(out < 0):
            raise ValueError(f"{name} must be nonnegative")
    elif np.any(out <= 0):
        raise ValueError(f"{name} must be positive")
    return out


def _per_joint_gain(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and arr.size == 1:
        arr = arr[0]
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected a scalar or {n} per-joint values")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be positive and finite")
    return arr


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """Variant tag, weight pair, gains and saturation levels for one run.

    k_s is the shared inter-robot stiffness (per joint). d_s (C1/C3), k_c and
    d_c (C2/C4) are per-robot per-joint arrays with rows (local, remote).
    delta_p / delta_d are the saturation levels of the proportional and
    damping channels (C3/C4 only).
    """

    variant: str
    weights: Weights
    n: int
    k_s: np.ndarray
    d_s: np.ndarray | None = None
    k_c: np.ndarray | None = None
    d_c: np.ndarray | None = None
    delta_p: float | None = None
    delta_d: float | None = None
    p_pos: float = field(init=False)
    p_vel: float = field(init=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        p_pos, p_vel = derive_exponents(self.weights)
        object.__setattr__(self, "p_pos", p_pos)
        object.__setattr__(self, "p_vel", p_vel)
        if self.uses_velocity:
            if self.d_s is None:
                raise ValueError(f"{self.variant} requires the velocity damping gain d_s")
        else:
            if self.k_c is None or self.d_c is None:
                raise ValueError(f"{self.variant} requires the virtual-state gains k_c and d_c")
        if self.is_bounded:
            if self.delta_p is None or self.delta_d is None:
                raise ValueError(f"{self.variant} requires saturation levels delta_p and delta_d")
            if not (self.delta_p > 0 and self.delta_d > 0):
                raise ValueError("saturation levels must be positive")

    @classmethod
    def build(cls, variant, n, weights, k_s, d_s=None, k_c=None, d_c=None,
              delta_p=None, delta_d=None) -> "ControllerConfig":
        """Construct from flexible gain specs (scalars, vectors, pairs)."""
        if not isinstance(weights, Weights):
            weights = Weights(*weights)
        kwargs = dict(
            variant=variant,
            weights=weights,
            n=int(n),
            k_s=_per_joint_gain(k_s, n, "k_s"),
        )
        if d_s is not None:
            kwargs["d_s"] = _per_robot_gain(d_s, n, "d_s", allow_zero=True)
        if k_c is not None:
            kwargs["k_c"] = _per_robot_gain(k_c, n, "k_c")
        if d_c is not None:
            kwargs["d_c"] = _per_robot_gain(d_c, n, "d_c")
        if delta_p is not None:
            kwargs["delta_p"] = float(delta_p)
        if delta_d is not None:
            kwargs["delta_d"] = float(delta_d)
        return cls(**kwargs)

    @property
    def uses_velocity(self) -> bool:
        return self.variant in ("C1", "C3")

    @property
    def is_bounded(self) -> bool:
        return self.variant in ("C3", "C4")

    @property
    def has_virtual_state(self) -> bool:
        return self.variant in ("C2", "C4")


@dataclass(frozen=True, eq=False)
class ControllerState:
    """Virtual positions of the output-feedback controllers (C2/C4)."""

    theta_l: np.ndarray
    theta_r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta_l", np.atleast_1d(np.asarray(self.theta_l, float)))
        object.__setattr__(self, "theta_r", np.atleast_1d(np.asarray(self.theta_r, float)))
        if not (np.all(np.isfinite(self.theta_l)) and np.all(np.isfinite(self.theta_r))):
            raise ValueError("controller state must be finite")

    @classmethod
    def at_robot_positions(cls, q_l, q_r) -> "ControllerState":
        """Default initialization theta_i(0) = q_i(0)."""
        return cls(theta_l=np.array(q_l, float), theta_r=np.array(q_r, float))


@dataclass(frozen=True)
class ControlAction:
    tau_l: np.ndarray
    tau_r: np.ndarray
    theta_dot_l: np.ndarray | None = None
    theta_dot_r: np.ndarray | None = None


def _proportional(config: ControllerConfig, error: np.ndarray) -> np.ndarray:
    if config.is_bounded:
        return config.k_s * sat_pow(error, config.p_pos, config.delta_p)
    return config.k_s * signed_pow(error, config.p_pos)


def c1_torques(config, params_l: RobotParams, params_r: RobotParams,
               state_l: RobotState, state_r: RobotState):
    """State-feedback law: shaped spring on the error plus joint damping."""
    if config.variant != "C1":
        raise ValueError(f"expected a C1 config, got {config.variant}")
    prop = _proportional(config, state_l.q - state_r.q)
    tau_l = -prop - config.d_s[LOCAL] * signed_pow(state_l.qdot, config.p_vel) \
        + gravity_vector(params_l, state_l.q)
    tau_r = prop - config.d_s[REMOTE] * signed_pow(state_r.qdot, config.p_vel) \
        + gravity_vector(params_r, state_r.q)
    return tau_l, tau_r


def theta_rate(config: ControllerConfig, theta_err: np.ndarray, side: int) -> np.ndarray:
    """Virtual-state velocity from the accumulated mismatch theta - q."""
    speed = (config.k_c[side] / config.d_c[side]) ** (1.0 / config.p_vel)
    if config.is_bounded:
        return -speed * sat_pow(theta_err, config.weights.theta_exponent, config.delta_d)
    return -speed * signed_pow(theta_err, config.weights.theta_exponent)


def c2_torques_and_theta_dot(config, params_l, params_r, state_l, state_r,
                             ctrl: ControllerState):
    """Output-feedback law: no velocity in any output; damping is injected
    through the virtual-state dynamics."""
    if config.variant != "C2":
        raise ValueError(f"expected a C2 config, got {config.variant}")
    tt_l = ctrl.theta_l - state_l.q
    tt_r = ctrl.theta_r - state_r.q
    prop = _proportional(config, state_l.q - state_r.q)
    tau_l = -prop + config.k_c[LOCAL] * signed_pow(tt_l, config.p_pos) \
        + gravity_vector(params_l, state_l.q)
    tau_r = prop + config.k_c[REMOTE] * signed_pow(tt_r, config.p_pos) \
        + gravity_vector(params_r, state_r.q)
    return tau_l, tau_r, theta_rate(config, tt_l, LOCAL), theta_rate(config, tt_r, REMOTE)


def c3_torques(config, params_l, params_r, state_l, state_r):
    """Bounded state-feedback law; see validate_saturation for the torque cap."""
    if config.variant != "C3":
        raise ValueError(f"expected a C3 config, got {config.variant}")
    prop = _proportional(config, state_l.q - state_r.q)
    tau_l = -prop - config.d_s[LOCAL] * sat_pow(state_l.qdot, config.p_vel, config.delta_d) \
        + gravity_vector(params_l, state_l.q)
    tau_r = prop - config.d_s[REMOTE] * sat_pow(state_r.qdot, config.p_vel, config.delta_d) \
        + gravity_vector(params_r, state_r.q)
    return tau_l, tau_r


def c4_torques_and_theta_dot(config, params_l, params_r, state_l, state_r,
                             ctrl: ControllerState):
    """Bounded output-feedback law."""
    if config.variant != "C4":
        raise ValueError(f"expected a C4 config, got {config.variant}")
    tt_l = ctrl.theta_l - state_l.q
    tt_r = ctrl.theta_r - state_r.q
    prop = _proportional(config, state_l.q - state_r.q)
    tau_l = -prop + config.k_c[LOCAL] * sat_pow(tt_l, config.p_pos, config.delta_d) \
        + gravity_vector(params_l, state_l.q)
    tau_r = prop + config.k_c[REMOTE] * sat_pow(tt_r, config.p_pos, config.delta_d) \
        + gravity_vector(params_r, state_r.q)
    return tau_l, tau_r, theta_rate(config, tt_l, LOCAL), theta_rate(config, tt_r, REMOTE)


def control_action(config, params_l, params_r, state_l, state_r,
                   ctrl: ControllerState | None = None) -> ControlAction:
    """Dispatch to the configured variant's torque (and virtual-rate) law."""
    if config.variant == "C1":
        tau_l, tau_r = c1_torques(config, params_l, params_r, state_l, state_r)
        return ControlAction(tau_l, tau_r)
    if config.variant == "C3":
        tau_l, tau_r = c3_torques(config, params_l, params_r, state_l, state_r)
        return ControlAction(tau_l, tau_r)
    if ctrl is None:
        raise ValueError(f"{config.variant} requires a ControllerState")
    if config.variant == "C2":
        return ControlAction(*c2_torques_and_theta_dot(
            config, params_l, params_r, state_l, state_r, ctrl))
    return ControlAction(*c4_torques_and_theta_dot(
        config, params_l, params_r, state_l, state_r, ctrl))


def shaped_potential(config, state_l: RobotState, state_r: RobotState,
                     ctrl: ControllerState | None = None) -> float:
    """Designed potential energy of the shaped closed loop.

    Positive definite in the error coordinates (and virtual-state mismatch
    for C2/C4); its error gradient is minus the proportional torque term.
    """
    err = state_l.q - state_r.q
    p = config.p_pos
    if config.is_bounded:
        value = float(np.sum(config.k_s * s_integral(err, config.delta_p, p)))
    else:
        value = float(np.sum(config.k_s * np.abs(err) ** (p + 1.0))) / (p + 1.0)
    if config.has_virtual_state:
        if ctrl is None:
            raise ValueError(f"{config.variant} requires a ControllerState")
        for side, tt in ((LOCAL, ctrl.theta_l - state_l.q), (REMOTE, ctrl.theta_r - state_r.q)):
            if config.is_bounded:
                value += float(np.sum(config.k_c[side] * s_integral(tt, config.delta_d, p)))
            else:
                value += float(np.sum(config.k_c[side] * np.abs(tt) ** (p + 1.0))) / (p + 1.0)
    return value


def dissipation_rate(config, state_l: RobotState, state_r: RobotState,
                     ctrl: ControllerState | None = None) -> float:
    """Analytic decay rate of the total shaped energy in free motion (<= 0).

    C1/C3 dissipate through the measured joint velocities, C2/C4 through the
    virtual-state velocities; saturation only slows the decay, it never
    changes its sign.
    """
    p = config.p_vel
    total = 0.0
    if config.uses_velocity:
        for side, qd in ((LOCAL, state_l.qdot), (REMOTE, state_r.qdot)):
            if config.is_bounded:
                total += float(np.sum(config.d_s[side] * qd * sat_pow(qd, p, config.delta_d)))
            else:
                total += float(np.sum(config.d_s[side] * np.abs(qd) ** (p + 1.0)))
    else:
        if ctrl is None:
            raise ValueError(f"{config.variant} requires a ControllerState")
        for side, tt in ((LOCAL, ctrl.theta_l - state_l.q), (REMOTE, ctrl.theta_r - state_r.q)):
            td = theta_rate(config, tt, side)
            total += float(np.sum(config.d_c[side] * np.abs(td) ** (p + 1.0)))
    return -total


@dataclass(frozen=True)
class SaturationReport:
    """Per-joint non-saturation check for the bounded variants.

    Two torque budgets are reported for each robot and joint. The literal
    budget multiplies gains by the raw saturation levels (k_s*delta_p +
    gain*delta_d); the implemented budget uses the actual output caps of the
    saturated power (delta^exponent), which is what the control law can
    really emit. The gate compares the larger of the two against the margin
    tau_limit - gravity_cap, so a passing report guarantees the emitted
    torque never reaches the limit under either reading.
    """

    literal_budget: np.ndarray      # (2, n)
    implemented_budget: np.ndarray  # (2, n)
    margin: np.ndarray              # (2, n), torque_limit - gravity_cap - budget
    passed: np.ndarray              # (2, n) bool
    unlimited: bool

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    def describe(self) -> str:
        lines = []
        if self.unlimited:
            lines.append("torque limits: unlimited -> non-saturation holds trivially")
        for side, name in ((LOCAL, "local"), (REMOTE, "remote")):
            for k in range(self.literal_budget.shape[1]):
                status = "pass" if self.passed[side, k] else "FAIL"
                lines.append(
                    f"{name} joint {k + 1}: budget literal={self.literal_budget[side, k]:.4f}"
                    f" implemented={self.implemented_budget[side, k]:.4f}"
                    f" margin={self.margin[side, k]:.4f} [{status}]"
                )
        return "\n".join(lines)


def validate_saturation(config, params_l: RobotParams, params_r: RobotParams) -> SaturationReport:
    """Check the per-joint saturation condition for a C3/C4 configuration.

    Required to pass before a bounded-variant run may claim that actuator
    limits are never reached.
    """
    if not config.is_bounded:
        raise ValueError("saturation validation applies to the bounded variants C3/C4")
    n = config.n
    gain = config.d_s if config.variant == "C3" else config.k_c
    # exponent acting inside the damping-channel saturation
    p_d = config.p_vel if config.variant == "C3" else config.p_pos
    lit = config.k_s * config.delta_p + gain * config.delta_d
    imp = config.k_s * config.delta_p**config.p_pos + gain * config.delta_d**p_d
    conservative = np.maximum(lit, imp)

    margin = np.full((2, n), np.inf)
    passed = np.ones((2, n), dtype=bool)
    unlimited = True
    for side, params in ((LOCAL, params_l), (REMOTE, params_r)):
        if params.torque_limits is None:
            continue
        unlimited = False
        headroom = params.torque_limits - params.bounds.gravity_caps
        margin[side] = headroom - conservative[side]
        passed[side] = margin[side] > 0.0
    return SaturationReport(
        literal_budget=lit,
        implemented_budget=imp,
        margin=margin,
        passed=passed,
        unlimited=unlimited,
    )
