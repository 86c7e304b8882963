import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from auvbound import shapes
from auvbound.channel import ChannelConfig
from auvbound.scenario import (ConfigError, ReplayError, RunLog, config_from_dict, load_config,
                               make_config, replay, report, run)

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
C30 = shapes.circle(30.0)


@pytest.fixture(scope="module")
def noisy_log():
    ch = ChannelConfig(loss_prob=0.2, range_noise_std=0.05)
    return run(make_config("heb_fence", C30, n_agents=2, duration=120.0, seed=3, channel_cfg=ch))


def test_same_seed_same_log(noisy_log):
    cfg = noisy_log.scenario()
    again = run(cfg)
    assert again == noisy_log
    for a, b in zip(again.trajectories, noisy_log.trajectories):
        assert a.tobytes() == b.tobytes()


def test_different_seed_differs(noisy_log):
    other = run(replace(noisy_log.scenario(), seed=4))
    assert other.diff(noisy_log) is not None


def test_replay_is_exact(noisy_log):
    assert replay(noisy_log) == noisy_log


def test_tampered_command_is_detected(noisy_log):
    bad = RunLog(noisy_log.config, noisy_log.trajectories, noisy_log.samples,
                 [list(c) for c in noisy_log.commands], noisy_log.version)
    t, psi, fx, reason = bad.commands[0][3]
    bad.commands[0][3] = (t, psi + 0.01, fx, reason)
    with pytest.raises(ReplayError, match="command #3"):
        replay(bad)


def test_version_mismatch_is_flagged(noisy_log):
    old = RunLog(noisy_log.config, noisy_log.trajectories, noisy_log.samples,
                 noisy_log.commands, version="0.0.0")
    with pytest.raises(ReplayError, match="version"):
        replay(old)


def test_save_load_round_trip(noisy_log, tmp_path):
    noisy_log.save(tmp_path / "run")
    loaded = RunLog.load(tmp_path / "run")
    assert loaded == noisy_log
    replay(loaded)


def test_load_rejects_non_log(tmp_path):
    with pytest.raises(ValueError, match="manifest"):
        RunLog.load(tmp_path)


def test_milling_replay_gives_identical_metrics(tmp_path):
    log = run(make_config("heb_mill", C30, n_agents=3, duration=200.0, seed=1))
    log.save(tmp_path)
    again = replay(RunLog.load(tmp_path))
    assert report(again).to_dict() == report(log).to_dict()


def test_zero_thrust_agent_stays_put():
    cfg = make_config("heb_fence", C30, duration=100.0, fx=0.0,
                      initial_poses=((5.0, -3.0, 0.4),))
    log = run(cfg)
    tr = log.trajectories[0]
    assert np.all(tr[:, 1] == 5.0) and np.all(tr[:, 2] == -3.0)
    assert {c[3] for c in log.commands[0]} == {"hold"}


def test_channel_delivery_precedes_heading_tick():
    cfg = make_config("rvb_mill", shapes.circle(2.0), duration=20.0, k_rate=5.0,
                      initial_poses=((2.5, 0.0, 0.0),))
    log = run(cfg)
    cmds = log.commands[0]
    ticks = [i for i, c in enumerate(cmds) if c[3] == "rate"]
    assert ticks
    for i in ticks:
        # a range and the 1 s timer fall due together; the range is handled first
        assert i > 0 and cmds[i - 1][0] == cmds[i][0] and cmds[i - 1][3] != "rate"


def test_no_hidden_coupling_between_agents():
    base = dict(duration=150.0, seed=2, channel_cfg=ChannelConfig(loss_prob=0.1))
    a = run(make_config("heb_fence", C30, n_agents=2,
                        initial_poses=((1.0, 2.0, 0.3), (-5.0, 4.0, 2.0)), **base))
    b = run(make_config("heb_fence", C30, n_agents=2,
                        initial_poses=((1.0, 2.0, 0.3), (10.0, -9.0, -1.0)), **base))
    assert np.array_equal(a.trajectories[0], b.trajectories[0])
    assert a.commands[0] == b.commands[0]
    assert not np.array_equal(a.trajectories[1], b.trajectories[1])


def test_logs_are_time_ordered(noisy_log):
    for tr, samples, cmds in zip(noisy_log.trajectories, noisy_log.samples, noisy_log.commands):
        assert np.all(np.diff(tr[:, 0]) > 0)
        assert all(a[2] <= b[2] for a, b in zip(samples, samples[1:]))
        assert all(a[0] <= b[0] for a, b in zip(cmds, cmds[1:]))


def test_log_every_thins_trajectory():
    cfg = replace(make_config("heb_fence", C30, duration=10.0), log_every=20)
    tr = run(cfg).trajectories[0]
    assert list(tr[:, 0]) == pytest.approx([float(i) for i in range(11)])


def test_start_radius():
    cfg = make_config("heb_mill", C30, n_agents=3, duration=1.0, start_radius=0.5)
    log = run(cfg)
    for tr in log.trajectories:
        assert math.hypot(tr[0, 1], tr[0, 2]) <= 0.5


class TestConfig:
    @pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_scenarios_load(self, path):
        cfg = load_config(path)
        assert config_from_dict(cfg.to_dict()) == cfg

    def test_dict_round_trip_with_poses_and_overrides(self):
        cfg = make_config("rvb_mill", shapes.circle(2.0), n_agents=2, k_rate=2.0,
                          initial_poses=((0.1, 0.2, 0.3), (0.4, 0.5, 0.6)))
        assert config_from_dict(cfg.to_dict()) == cfg

    def write(self, tmp_path, text):
        p = tmp_path / "s.yaml"
        p.write_text(text)
        return p

    def test_unknown_key_reports_line(self, tmp_path):
        p = self.write(tmp_path, "shape: circle\nradius: 30\nn_agents: 1\nduration: 10\n"
                                 "behavior:\n  mode: heb_fence\n  gain: 3\n")
        with pytest.raises(ConfigError) as exc:
            load_config(p)
        assert exc.value.line == 7
        assert "gain" in str(exc.value)

    def test_missing_shape_key_is_named(self, tmp_path):
        p = self.write(tmp_path, "shape: square\nn_agents: 1\nduration: 10\n"
                                 "behavior:\n  mode: heb_fence\n")
        with pytest.raises(ConfigError, match="side"):
            load_config(p)

    def test_invalid_value_reports_line(self, tmp_path):
        p = self.write(tmp_path, "shape: circle\nradius: 30\nn_agents: 1\nduration: 10\n"
                                 "behavior:\n  mode: heb_fence\nchannel:\n  loss_prob: 1.5\n")
        with pytest.raises(ConfigError) as exc:
            load_config(p)
        assert exc.value.line == 8

    def test_rvb_rejects_polygon(self, tmp_path):
        p = self.write(tmp_path, "shape: square\nside: 60\nn_agents: 1\nduration: 10\n"
                                 "behavior:\n  mode: rvb_fence\n")
        with pytest.raises(ConfigError, match="circular"):
            load_config(p)

    def test_slot_must_be_whole_steps(self):
        with pytest.raises(ConfigError, match="slot_time"):
            make_config("heb_fence", C30, channel_cfg=ChannelConfig(slot_time=0.33))

    def test_overrides(self):
        cfg = load_config(SCENARIOS / "fencing_circle30.yaml",
                          {"n_agents": 3, "seed": 9, "duration": 50.0})
        assert (cfg.n_agents, cfg.seed, cfg.duration) == (3, 9, 50.0)
        assert len(cfg.behaviors) == 3
