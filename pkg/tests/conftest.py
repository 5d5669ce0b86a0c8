"""Shared fixtures: the benchmark arm and the expensive session-scoped runs."""

import time
from dataclasses import dataclass, replace

import numpy as np
import pytest
from hypothesis import settings

import ftteleop as ft

settings.register_profile("numeric", deadline=None, max_examples=100)
settings.load_profile("numeric")


BENCHMARK = dict(
    masses=[1.8, 1.6],
    lengths=[0.8, 0.6],
    com_offsets=[0.4, 0.3],
    inertias=[0.096, 0.048],
)


@dataclass(frozen=True)
class TimedRun:
    trace: ft.SimTrace
    wall: float
    scenario: object


def _timed(scenario) -> TimedRun:
    start = time.perf_counter()
    trace = ft.run(scenario)
    return TimedRun(trace=trace, wall=time.perf_counter() - start, scenario=scenario)


@pytest.fixture(scope="session")
def benchmark_params() -> ft.RobotParams:
    return ft.RobotParams(**BENCHMARK)


@pytest.fixture(scope="session")
def benchmark_params_flat() -> ft.RobotParams:
    return ft.RobotParams(**BENCHMARK, gravity=0.0)


@pytest.fixture(scope="session")
def c1_config() -> ft.ControllerConfig:
    return ft.ControllerConfig.build(
        variant="C1", n=2, weights=(1.5, 1.0), k_s=6.0, d_s=8.0)


@pytest.fixture(scope="session")
def c1_run() -> TimedRun:
    """The bundled free-motion C1 benchmark at its native resolution."""
    return _timed(ft.read_bundled_scenario("c1_sim"))


@pytest.fixture(scope="session")
def c1_run_half_dt() -> TimedRun:
    cfg = ft.read_bundled_scenario("c1_sim")
    return _timed(replace(cfg, dt=cfg.dt / 2.0))


@pytest.fixture(scope="session")
def c1_asymptotic_run() -> TimedRun:
    cfg = ft.with_weights(ft.read_bundled_scenario("c1_sim"), 1.0, 1.0)
    return _timed(cfg)


@pytest.fixture(scope="session")
def c2_run() -> TimedRun:
    return _timed(ft.read_bundled_scenario("c2_sim"))


@pytest.fixture(scope="session")
def c3_run() -> TimedRun:
    return _timed(ft.read_bundled_scenario("c3_sim"))


@pytest.fixture(scope="session")
def c4_run() -> TimedRun:
    return _timed(ft.read_bundled_scenario("c4_sim"))


@pytest.fixture(scope="session")
def c2_rk4_run() -> TimedRun:
    """High-accuracy twin of the C2 scenario for tail-behavior checks.

    Forward Euler chatters at the non-smooth origin with velocity amplitude
    above 1e-3; the RK4 option resolves the converged tail cleanly."""
    cfg = ft.read_bundled_scenario("c2_sim")
    return _timed(replace(cfg, integrator="rk4", dt=5e-4, decimation=2e-3))


@pytest.fixture(scope="session")
def c4_rk4_run() -> TimedRun:
    cfg = ft.read_bundled_scenario("c4_sim")
    return _timed(replace(cfg, integrator="rk4", dt=5e-4, decimation=2e-3))


@pytest.fixture(scope="session")
def spring_run() -> TimedRun:
    return _timed(ft.read_bundled_scenario("c1_spring"))


@pytest.fixture(scope="session")
def c2_spring_run() -> TimedRun:
    """Output-feedback variant under the same passive environment."""
    base = ft.read_bundled_scenario("c1_spring")
    config = ft.ControllerConfig.build(
        variant="C2", n=2, weights=(1.5, 1.0), k_s=6.0, k_c=20.0, d_c=8.0)
    return _timed(replace(base, config=config, horizon=4.0))
