"""Scenario files: a plain nested key-value grammar for complete runs.

A scenario file is INI-style text with '#' comments. Sections:

    [robot.local] / [robot.remote]
        masses, lengths, com_offsets, inertias   comma-separated per link
        gravity                                  m/s^2 (0 = horizontal plane)
        torque_limits                            per-joint list or 'unlimited'

    [controller]
        variant      C1 | C2 | C3 | C4
        r1, r2       homogeneity weight pair (r1 = r2 gives the linear laws)
        k_s          shared stiffness, scalar or per-joint
        d_s          C1/C3 damping; d_s_local / d_s_remote override per robot
        k_c, d_c     C2/C4 virtual-state gains; *_local / *_remote overrides
        delta_p, delta_d   C3/C4 saturation levels

    [initial]
        q_local, q_remote            start positions [rad]
        qdot_local, qdot_remote     optional, default rest
        theta_local, theta_remote    optional, default = start positions

    [forces.local] / [forces.remote]
        kind = zero | pulse | spring_damper
        pulse:          start, stop [s], amplitude per joint [N m]
        spring_damper:  stiffness, damping (>= 0), anchor [rad]

    [simulation]
        horizon, dt, decimation [s]; integrator = euler | rk4; delay [s]

    [output]  (optional)
        trace, report, audit        output file paths

Loading validates everything at once and reports every violation, naming the
broken condition. Binary content is rejected.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .closed_loop_sim import ForceProfile, Scenario
from .controllers import ControllerConfig, validate_saturation
from .robot_dynamics import RobotParams
from .scalar_ops import Weights

__all__ = [
    "ScenarioConfig",
    "ScenarioError",
    "load_scenario",
    "parse_scenario",
    "dump_scenario",
    "with_weights",
    "bundled_scenario_names",
    "read_bundled_scenario",
]

_FORCE_KINDS = ("zero", "pulse", "spring_damper")


class ScenarioError(ValueError):
    """Carries every validation problem found in a scenario file."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True, eq=False)
class ScenarioConfig(Scenario):
    """A Scenario plus the optional output paths from the file."""

    trace_path: str | None = None
    report_path: str | None = None
    audit_path: str | None = None


def _floats(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def _fmt(value) -> str:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    return ", ".join(repr(float(v)) for v in arr)


class _SectionReader:
    """Pulls typed values out of one section, accumulating problems."""

    def __init__(self, parser, section: str, problems: list):
        self.section = section
        self.problems = problems
        self.data = dict(parser[section]) if parser.has_section(section) else None

    def missing(self) -> bool:
        return self.data is None

    def get(self, key: str, default=None, required: bool = False):
        if self.data is None:
            return default
        if key not in self.data:
            if required:
                self.problems.append(f"[{self.section}] missing required key '{key}'")
            return default
        return self.data.pop(key)

    def floats(self, key: str, default=None, required: bool = False):
        raw = self.get(key, required=required)
        if raw is None:
            return default
        try:
            return _floats(raw)
        except ValueError:
            self.problems.append(f"[{self.section}] {key}: cannot parse '{raw}' as numbers")
            return default

    def scalar(self, key: str, default=None, required: bool = False):
        raw = self.get(key, required=required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            self.problems.append(f"[{self.section}] {key}: cannot parse '{raw}' as a number")
            return default

    def leftovers(self):
        if self.data:
            for key in self.data:
                self.problems.append(f"[{self.section}] unknown key '{key}'")


def _read_robot(reader: _SectionReader, problems: list) -> RobotParams | None:
    if reader.missing():
        problems.append(f"missing section [{reader.section}]")
        return None
    masses = reader.floats("masses", required=True)
    lengths = reader.floats("lengths", required=True)
    com_offsets = reader.floats("com_offsets", required=True)
    inertias = reader.floats("inertias", required=True)
    gravity = reader.scalar("gravity", default=9.81)
    limits_raw = reader.get("torque_limits", default="unlimited")
    reader.leftovers()
    if any(v is None for v in (masses, lengths, com_offsets, inertias)):
        return None
    limits = None
    if str(limits_raw).strip().lower() != "unlimited":
        try:
            limits = _floats(str(limits_raw))
        except ValueError:
            problems.append(f"[{reader.section}] torque_limits: need numbers or 'unlimited'")
            return None
    try:
        return RobotParams(masses=masses, lengths=lengths, com_offsets=com_offsets,
                           inertias=inertias, gravity=gravity, torque_limits=limits)
    except ValueError as exc:
        problems.append(f"[{reader.section}] {exc}")
        return None


def _read_per_robot(reader: _SectionReader, key: str, n: int):
    """A gain given as 'key' (both robots) or key_local/key_remote pair."""
    base = reader.floats(key)
    local = reader.floats(f"{key}_local")
    remote = reader.floats(f"{key}_remote")
    if local is None and remote is None:
        return base
    if base is not None:
        reader.problems.append(
            f"[{reader.section}] give either '{key}' or the _local/_remote pair, not both")
        return None
    if local is None or remote is None:
        reader.problems.append(
            f"[{reader.section}] {key}_local and {key}_remote must be given together")
        return None
    expand = lambda v: np.full(n, v[0]) if v.size == 1 else v
    return np.vstack([expand(local), expand(remote)])


def _read_controller(reader: _SectionReader, n: int, problems: list) -> ControllerConfig | None:
    if reader.missing():
        problems.append("missing section [controller]")
        return None
    variant = (reader.get("variant", required=True) or "").strip().upper()
    r1 = reader.scalar("r1", required=True)
    r2 = reader.scalar("r2", required=True)
    k_s = reader.floats("k_s", required=True)
    d_s = _read_per_robot(reader, "d_s", n)
    k_c = _read_per_robot(reader, "k_c", n)
    d_c = _read_per_robot(reader, "d_c", n)
    delta_p = reader.scalar("delta_p")
    delta_d = reader.scalar("delta_d")
    reader.leftovers()
    if variant not in ("C1", "C2", "C3", "C4") or None in (r1, r2) or k_s is None:
        if variant not in ("C1", "C2", "C3", "C4"):
            problems.append(f"[controller] variant must be C1..C4, got '{variant}'")
        return None
    try:
        weights = Weights(r1=r1, r2=r2)
    except ValueError as exc:
        problems.append(f"[controller] {exc}")
        return None
    try:
        return ControllerConfig.build(
            variant=variant, n=n, weights=weights, k_s=k_s if k_s.size > 1 else float(k_s[0]),
            d_s=d_s, k_c=k_c, d_c=d_c, delta_p=delta_p, delta_d=delta_d)
    except ValueError as exc:
        problems.append(f"[controller] {exc}")
        return None


def _read_profile(reader: _SectionReader, n: int, problems: list) -> ForceProfile:
    if reader.missing():
        return ForceProfile()
    kind = (reader.get("kind", default="zero") or "zero").strip().lower()
    if kind not in _FORCE_KINDS:
        problems.append(f"[{reader.section}] kind must be one of {_FORCE_KINDS}")
        reader.leftovers()
        return ForceProfile()
    def per_joint(key: str, vec):
        if vec is None:
            return None
        if vec.size == 1:
            return np.full(n, vec[0])
        if vec.size != n:
            problems.append(f"[{reader.section}] {key} must have 1 or {n} entries")
            return None
        return vec

    kwargs = {}
    if kind == "pulse":
        kwargs["start"] = reader.scalar("start", default=0.0)
        kwargs["stop"] = reader.scalar("stop", default=0.0)
        amp = per_joint("amplitude", reader.floats("amplitude", required=True))
        if amp is not None:
            kwargs["amplitude"] = amp
    elif kind == "spring_damper":
        stiff = per_joint("stiffness", reader.floats("stiffness", required=True))
        if stiff is not None:
            kwargs["stiffness"] = stiff
        damp = per_joint("damping", reader.floats("damping"))
        if damp is not None:
            kwargs["damping"] = damp
        anchor = per_joint("anchor", reader.floats("anchor", required=True))
        if anchor is not None:
            kwargs["anchor"] = anchor
    reader.leftovers()
    try:
        return ForceProfile(kind=kind, **kwargs)
    except ValueError as exc:
        problems.append(f"[{reader.section}] {exc}")
        return ForceProfile()


def parse_scenario(text: str, label: str = "scenario") -> ScenarioConfig:
    """Parse and fully validate scenario text; raises ScenarioError with the
    complete list of problems on failure."""
    if "\x00" in text:
        raise ScenarioError(["binary content rejected: scenario files are plain text"])
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=label)
    except configparser.Error as exc:
        raise ScenarioError([str(exc)]) from exc

    problems: list[str] = []
    robot_l = _read_robot(_SectionReader(parser, "robot.local", problems), problems)
    robot_r = _read_robot(_SectionReader(parser, "robot.remote", problems), problems)
    if robot_l is not None and robot_r is not None and robot_l.n != robot_r.n:
        problems.append("local and remote robots must have the same joint count")
        robot_r = None

    # validate the controller block even when a robot block failed: infer the
    # joint count from whatever source is available so all errors surface
    if robot_l is not None:
        n = robot_l.n
    elif robot_r is not None:
        n = robot_r.n
    else:
        try:
            n = _floats(parser.get("initial", "q_local")).size
        except Exception:
            n = 1

    config = _read_controller(_SectionReader(parser, "controller", problems), n, problems)

    init = _SectionReader(parser, "initial", problems)
    q0_l = q0_r = None
    qd0_l = qd0_r = theta0_l = theta0_r = None
    if init.missing():
        problems.append("missing section [initial]")
    else:
        q0_l = init.floats("q_local", required=True)
        q0_r = init.floats("q_remote", required=True)
        qd0_l = init.floats("qdot_local")
        qd0_r = init.floats("qdot_remote")
        theta0_l = init.floats("theta_local")
        theta0_r = init.floats("theta_remote")
        init.leftovers()
        for name, vec in (("q_local", q0_l), ("q_remote", q0_r), ("qdot_local", qd0_l),
                          ("qdot_remote", qd0_r), ("theta_local", theta0_l),
                          ("theta_remote", theta0_r)):
            if vec is not None and n and vec.size != n:
                problems.append(f"[initial] {name} must have {n} entries")
            if vec is not None and not np.all(np.isfinite(vec)):
                problems.append(f"[initial] {name} must be finite")

    profile_l = _read_profile(_SectionReader(parser, "forces.local", problems), n or 1, problems)
    profile_r = _read_profile(_SectionReader(parser, "forces.remote", problems), n or 1, problems)

    sim = _SectionReader(parser, "simulation", problems)
    horizon = sim.scalar("horizon", default=8.0)
    dt = sim.scalar("dt", default=1e-4)
    decimation = sim.scalar("decimation", default=1e-3)
    integrator = (sim.get("integrator", default="euler") or "euler").strip().lower()
    delay = sim.scalar("delay", default=0.0)
    if not sim.missing():
        sim.leftovers()
    if horizon is None or horizon <= 0:
        problems.append("[simulation] horizon must be positive")
    if dt is None or dt <= 0:
        problems.append("[simulation] dt must be positive")
    elif decimation is not None:
        if dt > decimation:
            problems.append("[simulation] dt must not exceed the decimation interval")
        elif abs(decimation / dt - round(decimation / dt)) > 1e-9:
            problems.append("[simulation] decimation must be an integer multiple of dt")
    if integrator not in ("euler", "rk4"):
        problems.append("[simulation] integrator must be 'euler' or 'rk4'")
    if delay is None or delay < 0:
        problems.append("[simulation] delay must be nonnegative")

    out = _SectionReader(parser, "output", problems)
    trace_path = out.get("trace")
    report_path = out.get("report")
    audit_path = out.get("audit")
    if not out.missing():
        out.leftovers()

    known = {"robot.local", "robot.remote", "controller", "initial",
             "forces.local", "forces.remote", "simulation", "output"}
    for section in parser.sections():
        if section not in known:
            problems.append(f"unknown section [{section}]")

    # bounded variants with finite limits must pass the saturation condition
    if config is not None and config.is_bounded and robot_l is not None and robot_r is not None:
        report = validate_saturation(config, robot_l, robot_r)
        if not report.ok:
            problems.append(
                "saturation condition violated (per-joint torque budget must stay "
                "below torque_limit - gravity_cap):\n" + report.describe())

    if problems:
        raise ScenarioError(problems)

    return ScenarioConfig(
        params_l=robot_l, params_r=robot_r, config=config,
        q0_l=q0_l, q0_r=q0_r, qd0_l=qd0_l, qd0_r=qd0_r,
        theta0_l=theta0_l, theta0_r=theta0_r,
        profile_l=profile_l, profile_r=profile_r,
        horizon=horizon, dt=dt, decimation=decimation,
        integrator=integrator, delay=delay, label=label,
        trace_path=trace_path, report_path=report_path, audit_path=audit_path,
    )


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file from disk."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ScenarioError([f"binary content rejected: {exc}"]) from exc
    label = str(path).rsplit("/", 1)[-1]
    if label.endswith(".cfg"):
        label = label[:-4]
    return parse_scenario(text, label=label)


def _profile_lines(profile: ForceProfile) -> list[str]:
    lines = [f"kind = {profile.kind}"]
    if profile.kind == "pulse":
        lines += [f"start = {profile.start!r}", f"stop = {profile.stop!r}",
                  f"amplitude = {_fmt(profile.amplitude)}"]
    elif profile.kind == "spring_damper":
        lines.append(f"stiffness = {_fmt(profile.stiffness)}")
        if profile.damping is not None:
            lines.append(f"damping = {_fmt(profile.damping)}")
        lines.append(f"anchor = {_fmt(profile.anchor)}")
    return lines


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialize a scenario to canonical file text (floats via repr, so a
    reload is semantically identical)."""
    buf = io.StringIO()

    def section(name, lines):
        buf.write(f"[{name}]\n")
        for line in lines:
            buf.write(line + "\n")
        buf.write("\n")

    for name, params in (("robot.local", cfg.params_l), ("robot.remote", cfg.params_r)):
        lines = [
            f"masses = {_fmt(params.masses)}",
            f"lengths = {_fmt(params.lengths)}",
            f"com_offsets = {_fmt(params.com_offsets)}",
            f"inertias = {_fmt(params.inertias)}",
            f"gravity = {params.gravity!r}",
            "torque_limits = " + ("unlimited" if params.torque_limits is None
                                  else _fmt(params.torque_limits)),
        ]
        section(name, lines)

    ctl = cfg.config
    lines = [f"variant = {ctl.variant}", f"r1 = {ctl.weights.r1!r}", f"r2 = {ctl.weights.r2!r}",
             f"k_s = {_fmt(ctl.k_s)}"]
    for key, arr in (("d_s", ctl.d_s), ("k_c", ctl.k_c), ("d_c", ctl.d_c)):
        if arr is None:
            continue
        if np.array_equal(arr[0], arr[1]):
            lines.append(f"{key} = {_fmt(arr[0])}")
        else:
            lines.append(f"{key}_local = {_fmt(arr[0])}")
            lines.append(f"{key}_remote = {_fmt(arr[1])}")
    if ctl.delta_p is not None:
        lines.append(f"delta_p = {ctl.delta_p!r}")
    if ctl.delta_d is not None:
        lines.append(f"delta_d = {ctl.delta_d!r}")
    section("controller", lines)

    lines = [f"q_local = {_fmt(cfg.q0_l)}", f"q_remote = {_fmt(cfg.q0_r)}"]
    for key, vec in (("qdot_local", cfg.qd0_l), ("qdot_remote", cfg.qd0_r),
                     ("theta_local", cfg.theta0_l), ("theta_remote", cfg.theta0_r)):
        if vec is not None:
            lines.append(f"{key} = {_fmt(vec)}")
    section("initial", lines)

    section("forces.local", _profile_lines(cfg.profile_l))
    section("forces.remote", _profile_lines(cfg.profile_r))

    lines = [f"horizon = {cfg.horizon!r}", f"dt = {cfg.dt!r}",
             f"decimation = {cfg.decimation!r}", f"integrator = {cfg.integrator}",
             f"delay = {cfg.delay!r}"]
    section("simulation", lines)

    out_lines = [f"{key} = {value}" for key, value in
                 (("trace", cfg.trace_path), ("report", cfg.report_path),
                  ("audit", cfg.audit_path)) if value]
    if out_lines:
        section("output", out_lines)
    return buf.getvalue()


def with_weights(cfg: ScenarioConfig, r1: float, r2: float) -> ScenarioConfig:
    """Same scenario with a different weight pair (gains untouched)."""
    new_weights = Weights(r1=r1, r2=r2)
    new_config = ControllerConfig(
        variant=cfg.config.variant, weights=new_weights, n=cfg.config.n,
        k_s=cfg.config.k_s, d_s=cfg.config.d_s, k_c=cfg.config.k_c, d_c=cfg.config.d_c,
        delta_p=cfg.config.delta_p, delta_d=cfg.config.delta_d)
    return replace(cfg, config=new_config)


def bundled_scenario_names() -> list[str]:
    files = resources.files("ftteleop.configs")
    return sorted(p.name for p in files.iterdir() if p.name.endswith(".cfg"))


def read_bundled_scenario(name: str) -> ScenarioConfig:
    """Load one of the scenarios shipped with the package."""
    if not name.endswith(".cfg"):
        name = name + ".cfg"
    text = resources.files("ftteleop.configs").joinpath(name).read_text(encoding="utf-8")
    return parse_scenario(text, label=name[:-4])
