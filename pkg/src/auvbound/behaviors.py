"""
Range-only boundary controllers.

Four controllers share one event interface. Each handler takes the agent's
:class:`BehaviorState`, its :class:`BehaviorConfig`, the delivered
:class:`~auvbound.channel.RangeSample` and the current compass heading, and
returns ``(new_state, Command)``. Nothing is mutated, so replaying the same
event sequence reproduces the same commands bit for bit.

``rvb_fence``
    Outside the circle, turn by a fixed increment every new range; reverse the
    turn direction whenever the last turn made the range grow faster.
``rvb_mill``
    Proportional heading correction ``D*k*(r - R0)`` applied only when the
    agent is inside and closing, or outside and opening; optional constant
    turn rate on a timer.
``heb_fence``
    Estimate the bearing of the agent from the beacon by regressing range
    rates on headings; outside the boundary steer to ``theta + 180 deg``.
``heb_mill``
    Steer to ``psi_d(theta) + D*k*(r - R_d(theta))``.

Gains are given in degrees (``k`` in deg/m, ``k_rate`` in deg/s,
``delta_psi`` in deg) and converted at the point of use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import shapes
from .angles import wrap
from .channel import RangeSample
from .shapes import ShapeSpec

MODES = ("rvb_fence", "rvb_mill", "heb_fence", "heb_mill")
IN_BOUNDARY = ("hold",)


@dataclass(frozen=True)
class BehaviorConfig:
    mode: str
    shape: ShapeSpec
    D: int = 1
    k: float = 20.0
    k_rate: float = 0.0
    delta_psi: float = 20.0
    flip_tolerance: float = 0.01
    window_len: int = 5
    window_max_age: float | None = None
    heading_update_dt: float = 1.0
    fx: float = 0.5
    min_conditioning: float = 0.05
    in_boundary: str = "hold"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.D not in (1, -1):
            raise ValueError(f"D must be +1 or -1, got {self.D}")
        if self.k < 0 or self.k_rate < 0:
            raise ValueError("gains k and k_rate must be non-negative")
        if self.mode == "rvb_fence" and not self.delta_psi > 0:
            raise ValueError("delta_psi must be positive for rvb_fence")
        if self.mode.startswith("heb") and self.window_len < 2:
            raise ValueError("window_len must be at least 2 for HEB modes")
        if self.mode.startswith("rvb") and not self.shape.is_circle:
            raise ValueError("RVB controllers only support circular boundaries")
        if self.flip_tolerance < 0:
            raise ValueError("flip_tolerance must be non-negative")
        if not self.heading_update_dt > 0:
            raise ValueError("heading_update_dt must be positive")
        if self.fx < 0:
            raise ValueError("fx must be non-negative")
        if self.in_boundary not in IN_BOUNDARY:
            raise ValueError(f"in_boundary must be one of {IN_BOUNDARY}")


@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    amplitude: float
    conditioning: float
    valid: bool


INVALID = ThetaEstimate(0.0, 0.0, 0.0, False)


@dataclass(frozen=True)
class BehaviorState:
    range_history: tuple = ()
    rotation_dir: int = 1
    estimator_window: tuple = ()  # (t, u_r, psi)
    psi_cmd: float = 0.0
    last_theta: ThetaEstimate = field(default=INVALID)
    r_latest: float | None = None
    last_turn_t: float = -math.inf
    ref_rate: float | None = None


@dataclass(frozen=True)
class Command:
    t: float
    psi_cmd: float
    fx: float
    reason: str

    def to_row(self) -> tuple:
        return (self.t, self.psi_cmd, self.fx, self.reason)


def initial_state(config: BehaviorConfig, psi0: float) -> BehaviorState:
    # RVB fencing starts turning in the configured sense; any choice is valid
    return BehaviorState(rotation_dir=config.D, psi_cmd=wrap(psi0))


def estimate_theta(window, min_conditioning: float = 1e-9) -> ThetaEstimate:
    """Least-squares bearing from ``(u_r, psi)`` pairs.

    Fits ``u_r = K1 cos(psi) + K2 sin(psi)`` and returns
    ``theta = atan2(K2, K1)``, ``A = hypot(K1, K2)``. ``conditioning`` is the
    smallest singular value of the design matrix scaled by ``1/sqrt(n)``
    (0 for a single heading, ~0.71 for evenly spread headings); below
    ``min_conditioning`` the estimate is flagged invalid.
    """
    if len(window) < 2:
        return INVALID
    data = np.asarray(window, dtype=float)
    u_r, psi = data[:, 0], data[:, 1]
    X = np.column_stack((np.cos(psi), np.sin(psi)))
    sv = np.linalg.svd(X, compute_uv=False)
    cond = float(sv[-1] / math.sqrt(len(psi)))
    if not cond >= min_conditioning:
        return ThetaEstimate(0.0, 0.0, cond, False)
    (k1, k2), *_ = np.linalg.lstsq(X, u_r, rcond=None)
    return ThetaEstimate(math.atan2(k2, k1), math.hypot(k1, k2), cond, True)


def _hold(state: BehaviorState, config: BehaviorConfig, t: float):
    return state, Command(t, state.psi_cmd, config.fx, "hold")


def _push_range(state: BehaviorState, sample: RangeSample) -> BehaviorState:
    if sample.r is None:
        return state
    hist = (state.range_history + (sample,))[-3:]
    return replace(state, range_history=hist, r_latest=sample.r)


def _push_rate(state: BehaviorState, config: BehaviorConfig, sample: RangeSample,
               psi: float) -> BehaviorState:
    if sample.u_r is None:
        return state
    win = state.estimator_window + ((sample.t_recv, sample.u_r, psi),)
    if config.window_max_age is not None:
        cutoff = sample.t_recv - config.window_max_age
        win = tuple(w for w in win if w[0] >= cutoff)
    return replace(state, estimator_window=win[-config.window_len:])


def _estimate(state: BehaviorState, config: BehaviorConfig) -> ThetaEstimate:
    return estimate_theta([(w[1], w[2]) for w in state.estimator_window],
                          config.min_conditioning)


def _forget_turns(state: BehaviorState) -> BehaviorState:
    # back inside: the next excursion starts a fresh flip comparison
    if state.ref_rate is None:
        return state
    return replace(state, ref_rate=None)


def _rvb_turn(state: BehaviorState, config: BehaviorConfig, sample: RangeSample,
              psi_now: float):
    """One RVB fencing rotation step (the caller has established 'outside').

    The flip test compares the range rate seen since the previous turn with
    the rate seen before it: if the turn made the agent recede faster, the
    rotation sense is reversed. With a fixed sampling period and no latency
    this is the plain "last increment grew" rule; here ranges arrive late
    and possibly irregularly, so

    * rates (increment / sampling interval) are compared, not increments;
    * a rate only counts as "after the turn" once the midpoint of its
      sampling interval follows the turn command; until then the range is
      recorded and the agent keeps its heading;
    * rates within ``flip_tolerance`` (m/s) of each other count as equal, so
      an agent leaving radially does not dither about the outward heading.
    """
    t = sample.t_recv
    hist = state.range_history
    direction = state.rotation_dir
    if len(hist) < 2:
        # bootstrap: nothing to compare yet, just rotate
        return _turn(state, config, t, psi_now, direction, None)
    a, b = hist[-2], hist[-1]
    if _mid(a, b) <= state.last_turn_t:
        return _hold(state, config, t)
    rate = _rate(a, b)
    ref = state.ref_rate
    if ref is None and len(hist) == 3 and _mid(hist[0], a) > state.last_turn_t:
        ref = _rate(hist[0], a)  # first turn of an excursion: previous increment
    if ref is not None and rate > ref + config.flip_tolerance:
        direction = -direction
    return _turn(state, config, t, psi_now, direction, rate)


def _mid(a: RangeSample, b: RangeSample) -> float:
    return 0.5 * (a.t_meas + b.t_meas)


def _rate(a: RangeSample, b: RangeSample) -> float:
    return (b.r - a.r) / (b.t_meas - a.t_meas)


def _turn(state, config, t, psi_now, direction, rate):
    psi_cmd = wrap(psi_now + math.radians(config.delta_psi) * direction)
    state = replace(state, rotation_dir=direction, psi_cmd=psi_cmd, last_turn_t=t,
                    ref_rate=rate)
    return state, Command(t, psi_cmd, config.fx, "turn")


def rvb_fence_on_range(state: BehaviorState, config: BehaviorConfig,
                       sample: RangeSample, psi_now: float):
    if sample.r is None:
        return _hold(state, config, sample.t_recv)
    state = _push_range(state, sample)
    if shapes.contains(config.shape, sample.r, 0.0):
        return _hold(_forget_turns(state), config, sample.t_recv)
    return _rvb_turn(state, config, sample, psi_now)


def rvb_mill_on_range(state: BehaviorState, config: BehaviorConfig,
                      sample: RangeSample, psi_now: float):
    """Correct heading only in the closing-inside / opening-outside cases."""
    if sample.r is None:
        return _hold(state, config, sample.t_recv)
    state = _push_range(state, sample)
    hist = state.range_history
    if len(hist) < 2:
        return _hold(state, config, sample.t_recv)
    r, R0 = sample.r, config.shape.R0
    dr = r - hist[-2].r
    if (r < R0 and dr < 0) or (r > R0 and dr > 0):
        dpsi = config.D * math.radians(config.k) * (r - R0)
        psi_cmd = wrap(psi_now + dpsi)
        state = replace(state, psi_cmd=psi_cmd)
        return state, Command(sample.t_recv, psi_cmd, config.fx, "correct")
    return _hold(state, config, sample.t_recv)


def rvb_mill_heading_tick(state: BehaviorState, config: BehaviorConfig,
                          r_latest: float | None, t: float = 0.0):
    """Timer-driven constant turn ``D*k_rate*R0/r`` while at or beyond R0."""
    R0 = config.shape.R0
    if r_latest is None or config.k_rate == 0 or r_latest < R0:
        return _hold(state, config, t)
    ratio = R0 / r_latest if r_latest > 0 else 1.0
    rate = config.D * math.radians(config.k_rate) * ratio
    psi_cmd = wrap(state.psi_cmd + rate * config.heading_update_dt)
    state = replace(state, psi_cmd=psi_cmd)
    return state, Command(t, psi_cmd, config.fx, "rate")


def _explore(state: BehaviorState, config: BehaviorConfig, t: float, psi_now: float):
    psi_cmd = wrap(psi_now + config.D * math.radians(config.delta_psi))
    return replace(state, psi_cmd=psi_cmd), Command(t, psi_cmd, config.fx, "explore")


def heb_fence_on_range(state: BehaviorState, config: BehaviorConfig,
                       sample: RangeSample, psi_now: float,
                      psi_rate: float | None = None):
    """Point at the beacon (theta + 180 deg) whenever outside R_d(theta).

    A degenerate window (all headings alike, e.g. after a straight run)
    yields no bearing; while beyond the last known boundary radius the agent
    then turns by ``delta_psi`` in the ``D`` sense on every range, which
    diversifies the headings for the next estimate.
    """
    t = sample.t_recv
    state = _push_range(state, sample)
    state = _push_rate(state, config, sample, psi_now if psi_rate is None else psi_rate)
    r = state.r_latest
    if r is None:
        return _hold(state, config, t)
    est = _estimate(state, config)
    if est.valid:
        state = replace(state, last_theta=est)
        if r > shapes.radius_at(config.shape, est.theta):
            psi_cmd = wrap(est.theta + math.pi)
            state = replace(state, psi_cmd=psi_cmd)
            return state, Command(t, psi_cmd, config.fx, "return")
        return _hold(state, config, t)
    if sample.r is None:
        return _hold(state, config, t)
    if state.last_theta.valid:
        limit = shapes.radius_at(config.shape, state.last_theta.theta)
    else:
        limit = config.shape.max_radius
    if r > limit:
        return _explore(state, config, t, psi_now)
    return _hold(state, config, t)


def heb_mill_on_range(state: BehaviorState, config: BehaviorConfig,
                      sample: RangeSample, psi_now: float,
                      psi_rate: float | None = None):
    """Track the path with ``psi_d(theta) + D*k*(r - R_d(theta))``.

    Without a usable bearing the agent turns by ``delta_psi`` in the milling
    sense; a straight run can never produce one on its own.
    """
    t = sample.t_recv
    state = _push_range(state, sample)
    state = _push_rate(state, config, sample, psi_now if psi_rate is None else psi_rate)
    r = state.r_latest
    if r is None:
        return _hold(state, config, t)
    est = _estimate(state, config)
    if not est.valid:
        if sample.r is None:
            return _hold(state, config, t)
        return _explore(state, config, t, psi_now)
    psi_cmd = heb_mill_command(config, est.theta, r)
    state = replace(state, psi_cmd=psi_cmd, last_theta=est)
    return state, Command(t, psi_cmd, config.fx, "mill")


def heb_mill_command(config: BehaviorConfig, theta: float, r: float) -> float:
    """Path heading plus a radial correction clamped to +-90 deg.

    Beyond 90 deg the correction would point the agent backwards along the
    path, and far from the path (|k*err| > 180 deg) it would even wrap round
    to the wrong side, so it saturates at "straight in" / "straight out".
    """
    shape = config.shape
    psi_d = shapes.desired_heading_at(shape, theta, config.D)
    err = r - shapes.radius_at(shape, theta)
    corr = min(max(math.radians(config.k) * err, -math.pi / 2), math.pi / 2)
    return wrap(psi_d + config.D * corr)


_HANDLERS = {
    "rvb_fence": rvb_fence_on_range,
    "rvb_mill": rvb_mill_on_range,
    "heb_fence": heb_fence_on_range,
    "heb_mill": heb_mill_on_range,
}


def on_sample(state: BehaviorState, config: BehaviorConfig, sample: RangeSample,
              psi_now: float, psi_rate: float | None = None):
    """Dispatch a delivered sample to the configured controller.

    ``psi_rate`` is the heading to pair with ``sample.u_r`` in the bearing
    regression (see :func:`interval_heading`); it defaults to ``psi_now``.
    """
    handler = _HANDLERS[config.mode]
    if config.mode.startswith("heb"):
        return handler(state, config, sample, psi_now,
                       psi_now if psi_rate is None else psi_rate)
    return handler(state, config, sample, psi_now)


def interval_heading(headings) -> float:
    """Circular mean of compass readings logged over a measurement interval.

    A consecutive-range rate is a secant over ``[t_prev, t_meas]``, so the
    heading that explains it is the one the agent held during that interval,
    not the one it holds when the range finally arrives.
    """
    h = np.asarray(headings, dtype=float)
    if h.size == 0:
        raise ValueError("no headings in interval")
    return wrap(math.atan2(np.sin(h).sum(), np.cos(h).sum()))


def on_heading_tick(state: BehaviorState, config: BehaviorConfig, t: float):
    """Periodic timer; only RVB milling with ``k_rate > 0`` reacts.

    Returns ``(state, None)`` when nothing changes.
    """
    if config.mode != "rvb_mill" or config.k_rate == 0:
        return state, None
    new, cmd = rvb_mill_heading_tick(state, config, state.r_latest, t)
    if cmd.reason == "hold":
        return state, None
    return new, cmd
