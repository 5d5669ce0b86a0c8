"""Scenario-file grammar, validation reporting and the CLI front end."""

import numpy as np
import pytest

import ftteleop as ft
from ftteleop.cli import run_command

FAST_SCENARIO = """
[robot.local]
masses = 1.8, 1.6
lengths = 0.8, 0.6
com_offsets = 0.4, 0.3
inertias = 0.096, 0.048
gravity = 9.81
torque_limits = unlimited

[robot.remote]
masses = 1.8, 1.6
lengths = 0.8, 0.6
com_offsets = 0.4, 0.3
inertias = 0.096, 0.048
gravity = 9.81
torque_limits = unlimited

[controller]
variant = C1
r1 = 1.5
r2 = 1.0
k_s = 6.0
d_s = 8.0

[initial]
q_local = 1.0, -0.4
q_remote = 1.3, 0.3

[forces.local]
kind = zero

[forces.remote]
kind = zero

[simulation]
horizon = 0.5
dt = 1e-3
decimation = 1e-2
"""


def _write(tmp_path, text, name="fast.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadScenario:
    def test_bundled_benchmark_values(self):
        cfg = ft.read_bundled_scenario("c1_sim")
        np.testing.assert_array_equal(cfg.params_l.masses, [1.8, 1.6])
        np.testing.assert_array_equal(cfg.params_l.lengths, [0.8, 0.6])
        np.testing.assert_array_equal(cfg.params_l.com_offsets, [0.4, 0.3])
        np.testing.assert_array_equal(cfg.params_l.inertias, [0.096, 0.048])
        assert cfg.config.variant == "C1"
        assert cfg.config.weights.r1 == 1.5
        assert cfg.config.weights.r2 == 1.0
        np.testing.assert_array_equal(cfg.config.k_s, [6.0, 6.0])
        np.testing.assert_array_equal(cfg.config.d_s, np.full((2, 2), 8.0))
        np.testing.assert_array_equal(cfg.q0_l, [1.0, -0.4])
        np.testing.assert_array_equal(cfg.q0_r, [1.3, 0.3])
        assert cfg.dt == 1e-4
        assert cfg.horizon == 8.0
        assert cfg.integrator == "euler"

    def test_all_bundled_scenarios_load(self):
        for name in ft.bundled_scenario_names():
            cfg = ft.read_bundled_scenario(name)
            assert cfg.params_l.n == 2

    def test_collects_every_problem(self, tmp_path):
        text = FAST_SCENARIO.replace("masses = 1.8, 1.6", "masses = -1, 1.6", 1)
        text = text.replace("r1 = 1.5", "r1 = 2.0")
        with pytest.raises(ft.ScenarioError) as info:
            ft.load_scenario(_write(tmp_path, text))
        message = str(info.value)
        assert "masses" in message
        assert "discontinuous" in message

    def test_rejects_inverted_weights(self, tmp_path):
        text = FAST_SCENARIO.replace("r1 = 1.5", "r1 = 0.8")
        with pytest.raises(ft.ScenarioError, match="ordering"):
            ft.load_scenario(_write(tmp_path, text))

    def test_rejects_saturation_budget_overrun(self, tmp_path):
        text = FAST_SCENARIO.replace("variant = C1", "variant = C3")
        text = text.replace("d_s = 8.0", "d_s = 8.0\ndelta_p = 1.0\ndelta_d = 1.0")
        text = text.replace("torque_limits = unlimited", "torque_limits = 30.0, 12.0")
        with pytest.raises(ft.ScenarioError, match="saturation condition"):
            ft.load_scenario(_write(tmp_path, text))

    def test_unknown_keys_and_sections_flagged(self, tmp_path):
        text = FAST_SCENARIO + "\n[mystery]\nvalue = 1\n"
        text = text.replace("kind = zero", "kind = zero\nbogus = 3", 1)
        with pytest.raises(ft.ScenarioError) as info:
            ft.load_scenario(_write(tmp_path, text))
        assert "unknown section [mystery]" in str(info.value)
        assert "unknown key 'bogus'" in str(info.value)

    def test_rejects_binary(self, tmp_path):
        path = tmp_path / "bin.cfg"
        path.write_bytes(b"\x00\x01\x02binary")
        with pytest.raises(ft.ScenarioError, match="binary"):
            ft.load_scenario(str(path))

    def test_missing_sections_reported(self, tmp_path):
        with pytest.raises(ft.ScenarioError) as info:
            ft.load_scenario(_write(tmp_path, "[controller]\nvariant = C1\n"))
        message = str(info.value)
        assert "[robot.local]" in message
        assert "[initial]" in message

    def test_parse_error_carries_line_number(self, tmp_path):
        text = FAST_SCENARIO.replace("k_s = 6.0", "k_s 6.0")
        with pytest.raises(ft.ScenarioError, match="line"):
            ft.load_scenario(_write(tmp_path, text))

    def test_dt_decimation_consistency(self, tmp_path):
        text = FAST_SCENARIO.replace("dt = 1e-3", "dt = 3e-2")
        with pytest.raises(ft.ScenarioError, match="decimation"):
            ft.load_scenario(_write(tmp_path, text))

    def test_per_robot_overrides(self, tmp_path):
        text = FAST_SCENARIO.replace(
            "d_s = 8.0", "d_s_local = 8.0\nd_s_remote = 2.0, 3.0")
        cfg = ft.load_scenario(_write(tmp_path, text))
        np.testing.assert_array_equal(cfg.config.d_s[0], [8.0, 8.0])
        np.testing.assert_array_equal(cfg.config.d_s[1], [2.0, 3.0])


class TestRoundTrip:
    @pytest.mark.parametrize("name", ["c1_sim", "c2_sim", "c3_sim", "c4_sim", "c1_spring"])
    def test_dump_parse_fixed_point(self, name):
        cfg = ft.read_bundled_scenario(name)
        text = ft.dump_scenario(cfg)
        back = ft.parse_scenario(text, label=cfg.label)
        assert ft.dump_scenario(back) == text
        np.testing.assert_array_equal(back.q0_l, cfg.q0_l)
        np.testing.assert_array_equal(back.config.k_s, cfg.config.k_s)
        assert back.config.variant == cfg.config.variant
        assert back.dt == cfg.dt
        assert back.horizon == cfg.horizon
        assert back.profile_r.kind == cfg.profile_r.kind

    def test_weight_swap_helper(self):
        cfg = ft.read_bundled_scenario("c1_sim")
        twin = ft.with_weights(cfg, 1.0, 1.0)
        assert twin.config.weights.r1 == 1.0
        assert twin.config.p_pos == 1.0
        np.testing.assert_array_equal(twin.config.k_s, cfg.config.k_s)


class TestCli:
    def test_simulate_writes_outputs(self, tmp_path, capsys):
        cfg_path = _write(tmp_path, FAST_SCENARIO)
        code = run_command(["simulate", cfg_path, "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "t* ~" in out
        assert (tmp_path / "fast_trace.csv").exists()
        assert (tmp_path / "fast_report.txt").exists()
        trace = ft.SimTrace.from_csv(tmp_path / "fast_trace.csv")
        assert trace.samples == 51

    def test_simulate_accepts_bundled_name(self, tmp_path, capsys):
        code = run_command(["simulate", "c1_sim", "--out", str(tmp_path),
                            "--dt", "2e-3"])
        # coarse override keeps this fast; convergence quality is irrelevant
        assert code in (0, 4)

    def test_missing_file_exit_code(self, capsys):
        assert run_command(["simulate", "no_such_scenario.cfg"]) == 2

    def test_invalid_scenario_exit_code(self, tmp_path, capsys):
        bad = _write(tmp_path, FAST_SCENARIO.replace("r1 = 1.5", "r1 = 2.0"))
        assert run_command(["simulate", bad]) == 3
        assert "discontinuous" in capsys.readouterr().err

    def test_unstable_exit_code(self, tmp_path, capsys):
        text = FAST_SCENARIO.replace("k_s = 6.0", "k_s = 1e9")
        text = text.replace("dt = 1e-3", "dt = 1e-2")
        text = text.replace("decimation = 1e-2", "decimation = 1e-2")
        text = text.replace("horizon = 0.5", "horizon = 20.0")
        with np.errstate(all="ignore"):
            code = run_command(["simulate", _write(tmp_path, text)])
        assert code == 4

    def test_validate_passes_on_bundled_bounded(self, tmp_path, capsys):
        code = run_command(["validate", "c3_sim", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "margin" in out
        assert "pass" in out

    def test_compare_reports_both_runs(self, tmp_path, capsys):
        cfg_path = _write(tmp_path, FAST_SCENARIO)
        code = run_command(["compare", cfg_path, "--out", str(tmp_path), "--tol", "0.5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "finite-time" in out
        assert "asymptotic" in out
        assert (tmp_path / "fast_compare.txt").exists()

    def test_audit_passes_on_fast_scenario(self, tmp_path, capsys):
        cfg_path = _write(tmp_path, FAST_SCENARIO)
        code = run_command(["audit", cfg_path, "--out", str(tmp_path), "--seed", "5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "[pass] core degree defect" in out
        assert (tmp_path / "fast_audit.csv").exists()
        table = np.loadtxt(tmp_path / "fast_audit.csv", delimiter=",", skiprows=1)
        assert table.shape[1] == 2
        assert np.all(np.diff(table[:, 0]) < 0)

    def test_config_flag_alias(self, tmp_path):
        cfg_path = _write(tmp_path, FAST_SCENARIO)
        assert run_command(["validate", "--config", cfg_path]) == 0

    def test_no_scenario_given(self, capsys):
        assert run_command(["simulate"]) == 2
