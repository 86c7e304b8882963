"""
Acoustic link between the beacon and the agents.

Time is divided into slots of ``slot_time`` seconds (one packet each). Two
timing modes exist:

``simple``
    One two-way range per slot, agents served round-robin. A single agent
    therefore gets a range every slot, N agents every N slots.
``protocol``
    Each agent's turn takes three slots: beacon ping, agent ack, beacon
    broadcast. The range is known once the ack lands, and the broadcast is
    heard by everyone.

A range delivered at time ``t`` was sampled one slot earlier. Range rates come
either from the difference of consecutive delivered ranges, or from a Doppler
reading; Doppler readings are also available to every agent on each beacon
broadcast (every slot in ``simple`` mode), which is what makes that source
scale with the number of agents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import AgentState

RATE_SOURCES = ("consecutive", "doppler")
TIMING_MODES = ("simple", "protocol")

# message kinds returned by schedule_slot
RANGE = "range"
PING = "ping"
ACK = "ack"
BROADCAST = "broadcast"


@dataclass(frozen=True)
class ChannelConfig:
    slot_time: float = 1.0
    loss_prob: float = 0.0
    rate_source: str = "consecutive"
    range_noise_std: float = 0.0
    doppler_noise_std: float = 0.0
    ranging_increment: float = 0.0
    timing_mode: str = "simple"
    seed: int = 0

    def __post_init__(self):
        if not self.slot_time > 0:
            raise ValueError(f"slot_time must be positive, got {self.slot_time}")
        if not 0 <= self.loss_prob < 1:
            raise ValueError(f"loss_prob must be in [0, 1), got {self.loss_prob}")
        if self.rate_source not in RATE_SOURCES:
            raise ValueError(f"rate_source must be one of {RATE_SOURCES}")
        if self.timing_mode not in TIMING_MODES:
            raise ValueError(f"timing_mode must be one of {TIMING_MODES}")
        if self.range_noise_std < 0 or self.doppler_noise_std < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if self.ranging_increment < 0:
            raise ValueError("ranging_increment must be non-negative")

    @property
    def slots_per_turn(self) -> int:
        return 3 if self.timing_mode == "protocol" else 1

    def range_period(self, n_agents: int) -> float:
        """Nominal time between two ranges of the same agent (no loss)."""
        return self.slot_time * self.slots_per_turn * n_agents


@dataclass(frozen=True)
class RangeSample:
    """One delivered measurement.

    ``r`` is None for Doppler-only samples taken from a broadcast. ``u_r`` is
    None for the very first consecutive-mode range (nothing to difference).
    """

    agent_id: int
    t_meas: float
    t_recv: float
    r: float | None
    u_r: float | None
    source: str

    def __post_init__(self):
        if self.t_recv < self.t_meas:
            raise ValueError("sample received before it was measured")
        if self.r is not None and self.r < 0:
            raise ValueError("negative range")

    def to_row(self) -> tuple:
        return (self.agent_id, self.t_meas, self.t_recv, self.r, self.u_r, self.source)


def schedule_slot(config: ChannelConfig, n_agents: int, k: int):
    """Message completing at the end of slot ``k`` as ``(agent_id, kind)``."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    if k < 0:
        return None
    if config.timing_mode == "simple":
        return (k % n_agents, RANGE)
    turn, phase = divmod(k, 3)
    return (turn % n_agents, (PING, ACK, BROADCAST)[phase])


def schedule_tick(config: ChannelConfig, n_agents: int, t: float):
    """Message delivered at time ``t``, or None between slot boundaries.

    Slot ``k`` spans ``[k, k+1) * slot_time`` and its message is delivered at
    the end of the slot.
    """
    q = t / config.slot_time
    k = round(q)
    if abs(q - k) > 1e-9:
        return None
    return schedule_slot(config, n_agents, k - 1)


def quantize_range(r: float, increment: float) -> float:
    """Round ``r`` to the nearest multiple of ``increment`` (0 disables)."""
    if increment < 0:
        raise ValueError("increment must be non-negative")
    if increment == 0:
        return r
    return round(r / increment) * increment


class Channel:
    """Stateful link: loss/noise RNG and the last delivered range per agent.

    Each agent owns an independent random stream spawned from
    ``config.seed`` so dropping an agent never perturbs the others' draws.
    """

    def __init__(self, config: ChannelConfig, n_agents: int):
        self.config = config
        self.n_agents = n_agents
        seqs = np.random.SeedSequence(config.seed).spawn(n_agents)
        self._rngs = [np.random.default_rng(s) for s in seqs]
        self._last = [None] * n_agents  # (t_meas, r) of last delivered range

    def _draw(self, agent_id: int):
        rng = self._rngs[agent_id]
        lost = rng.random() < self.config.loss_prob
        return lost, rng.standard_normal(), rng.standard_normal()

    def measure_range(self, meas_state: AgentState, agent_id: int, t: float,
                      flow=(0.0, 0.0)) -> RangeSample | None:
        """Two-way range delivered at ``t`` for an agent whose true state one
        slot earlier was ``meas_state``. Returns None if the packet is lost."""
        cfg = self.config
        lost, n_r, n_d = self._draw(agent_id)
        if lost:
            return None
        t_meas = t - cfg.slot_time
        r = meas_state.r + cfg.range_noise_std * n_r
        r = quantize_range(max(r, 0.0), cfg.ranging_increment)
        if cfg.rate_source == "doppler":
            u_r = meas_state.radial_speed(flow) + cfg.doppler_noise_std * n_d
        else:
            prev = self._last[agent_id]
            u_r = None if prev is None else (r - prev[1]) / (t_meas - prev[0])
        self._last[agent_id] = (t_meas, r)
        return RangeSample(agent_id, t_meas, t, r, u_r, cfg.rate_source)

    def measure_doppler(self, state: AgentState, agent_id: int, t: float,
                        flow=(0.0, 0.0)) -> RangeSample | None:
        """Doppler-only reading taken when a beacon broadcast arrives at ``t``."""
        lost, _, n_d = self._draw(agent_id)
        if lost:
            return None
        u_r = state.radial_speed(flow) + self.config.doppler_noise_std * n_d
        return RangeSample(agent_id, t, t, None, u_r, "doppler")
