import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from auvbound import dynamics
from auvbound.dynamics import AgentState, DynamicsParams

P = DynamicsParams()
finite = st.floats(-2, 2, allow_nan=False)
heading = st.floats(-math.pi, math.pi, allow_nan=False)


def simulate(params, seconds, fx=0.5, cmd_every=25.0, flow=(0.0, 0.0)):
    """Drive one agent through a fixed zig-zag of heading commands; return x, y arrays."""
    s = AgentState(fx=fx)
    n = round(seconds / params.dt)
    per_cmd = round(cmd_every / params.dt)
    xs, ys = [s.x], [s.y]
    for i in range(n):
        if i % per_cmd == 0:
            s = AgentState(s.x, s.y, s.u, s.v, s.psi, math.radians(70 * ((i // per_cmd) % 5) - 140), fx)
        s = dynamics.step(s, params, flow)
        xs.append(s.x)
        ys.append(s.y)
    return np.array(xs), np.array(ys)


def test_first_step_from_rest():
    p = DynamicsParams(m=6.0, dt=0.1)
    s = dynamics.step(AgentState(fx=0.5), p)
    assert s.u == pytest.approx(0.5 / 6 * 0.1, abs=1e-15)
    assert s.v == 0.0


def test_heading_slew_one_step():
    p = DynamicsParams(psi_rate_max=math.radians(30), dt=0.1)
    s = dynamics.step(AgentState(psi=0.0, psi_cmd=math.pi / 2), p)
    assert math.degrees(s.psi) == pytest.approx(3.0)


def test_slew_stops_exactly_on_command():
    p = DynamicsParams(dt=0.1)
    s = AgentState(psi=0.0, psi_cmd=math.radians(4.0))
    for _ in range(5):
        s = dynamics.step(s, p)
    assert s.psi == s.psi_cmd


def test_slew_takes_shorter_arc_across_pi():
    p = DynamicsParams(dt=0.02)  # 0.6 deg per step
    s = dynamics.step(AgentState(psi=math.radians(179), psi_cmd=math.radians(-179)), p)
    assert math.degrees(s.psi) == pytest.approx(179.6)


def test_pure_advection():
    p = DynamicsParams(dt=1.0)
    s = dynamics.step(AgentState(), p, flow=(0.08, 0.0))
    assert (s.x, s.y) == pytest.approx((0.08, 0.0))


def test_world_frame_convention():
    s = AgentState(u=1.0, v=0.5, psi=0.0)
    assert s.world_velocity() == pytest.approx((1.0, -0.5))


@pytest.mark.parametrize("fx, expected", [(0.0, 0.0), (0.5, 0.3397), (1.0, 0.4852)])
def test_terminal_speed_oracle(fx, expected):
    # positive root of Xuu u^2 + Xu u - fx = 0
    oracle = (-P.Xu + math.sqrt(P.Xu ** 2 + 4 * P.Xuu * fx)) / (2 * P.Xuu)
    assert dynamics.terminal_surge_speed(P, fx) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(expected, abs=1e-4)


def test_simulated_terminal_speed():
    s = AgentState(fx=0.5)
    for _ in range(round(200 / P.dt)):
        s = dynamics.step(s, P)
    assert abs(s.u - dynamics.terminal_surge_speed(P, 0.5)) < 1e-3


def test_dt_halving_changes_path_length_by_under_one_percent():
    x1, y1 = simulate(P, 1000.0)
    x2, y2 = simulate(DynamicsParams(dt=P.dt / 2), 1000.0)
    L1 = np.hypot(np.diff(x1), np.diff(y1)).sum()
    L2 = np.hypot(np.diff(x2), np.diff(y2)).sum()
    assert abs(L1 - L2) / L1 < 0.01
    assert math.hypot(x1[-1] - x2[-1], y1[-1] - y2[-1]) < 0.01 * L1


def test_zero_thrust_at_rest_is_static():
    s0 = AgentState(x=3.0, y=-4.0, psi=1.0, psi_cmd=1.0)
    s = s0
    for _ in range(100):
        s = dynamics.step(s, P)
    assert (s.x, s.y, s.u, s.v, s.psi) == (s0.x, s0.y, 0.0, 0.0, s0.psi)


def test_invalid_params():
    with pytest.raises(ValueError):
        DynamicsParams(m=0)
    with pytest.raises(ValueError):
        DynamicsParams(dt=-1)
    with pytest.raises(ValueError):
        DynamicsParams(Xuu=-1)
    with pytest.raises(ValueError):
        AgentState(x=math.nan)


@given(u=finite, v=finite, psi=heading, cmd=heading)
def test_speed_non_increasing_without_thrust(u, v, psi, cmd):
    s = AgentState(u=u, v=v, psi=psi, psi_cmd=cmd)
    for _ in range(20):
        nxt = dynamics.step(s, P)
        assert math.hypot(nxt.u, nxt.v) <= math.hypot(s.u, s.v) + 1e-15
        s = nxt


@given(psi=heading, cmd=heading, rate=st.floats(0.01, 3.0))
def test_slew_bounded_and_never_overshoots(psi, cmd, rate):
    p = DynamicsParams(psi_rate_max=rate, dt=0.1)
    s = AgentState(psi=psi, psi_cmd=cmd)
    before = abs(math.remainder(cmd - s.psi, 2 * math.pi))
    nxt = dynamics.step(s, p)
    moved = abs(math.remainder(nxt.psi - s.psi, 2 * math.pi))
    after = abs(math.remainder(cmd - nxt.psi, 2 * math.pi))
    assert moved <= rate * p.dt + 1e-12
    assert after <= before + 1e-12
    assert after == pytest.approx(max(0.0, before - rate * p.dt), abs=1e-9)
    assert -math.pi < nxt.psi <= math.pi


@given(u=finite, v=finite, psi=heading, cmd=heading, fx=st.floats(0, 2))
def test_step_is_deterministic(u, v, psi, cmd, fx):
    s = AgentState(1.0, 2.0, u, v, psi, cmd, fx)
    assert dynamics.step(s, P, (0.01, 0.02)) == dynamics.step(s, P, (0.01, 0.02))
