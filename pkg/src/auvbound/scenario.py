"""
Deterministic fixed-step scenario engine.

One run advances every agent on an integer step counter (``t = n * dt``).
At each step, in this order:

1. if a channel slot ends, the scheduled message is delivered and the
   receiving controllers react;
2. controllers with a heading timer due at this step tick (channel first on a
   tie);
3. every agent's dynamics advance by ``dt``.

Everything random (start poses, packet loss, measurement noise) comes from
the scenario seed, so a config and a seed fully determine the :class:`RunLog`.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__, behaviors, channel as chan, dynamics, shapes
from .behaviors import BehaviorConfig
from .channel import ChannelConfig, RangeSample
from .dynamics import AgentState, DynamicsParams
from .metrics import MetricsReport, Trajectory, fencing_report, milling_report


class ConfigError(ValueError):
    """Invalid scenario configuration; ``line`` points into the source file when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ReplayError(RuntimeError):
    """A replayed run did not reproduce its log."""


BEHAVIOR_KEYS = ("mode", "D", "k", "k_rate", "delta_psi", "flip_tolerance", "window_len", "window_max_age",
                 "heading_update_dt", "fx", "min_conditioning", "in_boundary")
CHANNEL_KEYS = ("slot_time", "loss_prob", "rate_source", "range_noise_std",
                "doppler_noise_std", "ranging_increment", "timing_mode")
DYNAMICS_KEYS = ("Xu", "Xuu", "Yv", "Yvv", "m", "psi_rate_max", "psi_rate_max_rad", "dt")
SHAPE_KEYS = ("shape", "radius", "side", "vertices", "tip", "inner")
TOP_KEYS = ("name", "n_agents", "duration", "seed", "behavior", "agents", "dynamics",
            "channel", "flow", "metrics_skip", "log_every", "settle_window",
            "settle_band", "start_radius") + SHAPE_KEYS


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int
    duration: float
    shape: shapes.ShapeSpec
    behaviors: tuple  # one BehaviorConfig per agent
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    flow: tuple = (0.0, 0.0)
    initial_poses: tuple | None = None  # ((x, y, psi), ...) with psi in rad
    seed: int = 0
    metrics_skip: float | None = None
    log_every: int = 1
    settle_window: float = 30.0
    settle_band: float | None = None
    start_radius: float | None = None  # random starts within this radius of the beacon
    name: str = ""

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigError("n_agents must be at least 1", key="n_agents")
        if not self.duration > 0:
            raise ConfigError("duration must be positive", key="duration")
        if len(self.behaviors) != self.n_agents:
            raise ConfigError("need one behavior per agent", key="behavior")
        if self.initial_poses is not None:
            if len(self.initial_poses) != self.n_agents:
                raise ConfigError("need one initial pose per agent", key="agents")
            if not all(math.isfinite(v) for p in self.initial_poses for v in p):
                raise ConfigError("initial poses must be finite", key="agents")
        if self.start_radius is not None and not self.start_radius > 0:
            raise ConfigError("start_radius must be positive", key="start_radius")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1", key="log_every")
        _steps(self.channel.slot_time, self.dynamics.dt, "channel.slot_time")
        for b in self.behaviors:
            _steps(b.heading_update_dt, self.dynamics.dt, "behavior.heading_update_dt")
        _steps(self.duration, self.dynamics.dt, "duration")

    @property
    def mode(self) -> str:
        return self.behaviors[0].mode

    def to_dict(self) -> dict:
        """Plain mapping that :func:`config_from_dict` turns back into an equal config."""
        base = self.behaviors[0]
        d = {"name": self.name, "n_agents": self.n_agents, "duration": self.duration,
             "seed": self.seed}
        d.update(self.shape.to_dict())
        d["behavior"] = _behavior_dict(base)
        agents = []
        for i, b in enumerate(self.behaviors):
            entry = {k: v for k, v in _behavior_dict(b).items() if d["behavior"][k] != v}
            if self.initial_poses is not None:
                x, y, psi = self.initial_poses[i]
                entry.update(x=x, y=y, psi_rad=psi)
            agents.append(entry)
        if any(agents):
            d["agents"] = agents
        dyn = asdict(self.dynamics)
        dyn["psi_rate_max_rad"] = dyn.pop("psi_rate_max")
        d["dynamics"] = dyn
        ch = asdict(self.channel)
        ch.pop("seed")
        d["channel"] = ch
        d["flow"] = list(self.flow)
        d["metrics_skip"] = self.metrics_skip
        d["log_every"] = self.log_every
        d["settle_window"] = self.settle_window
        d["settle_band"] = self.settle_band
        d["start_radius"] = self.start_radius
        return d


def _behavior_dict(b: BehaviorConfig) -> dict:
    return {k: getattr(b, k) for k in BEHAVIOR_KEYS}


def _steps(span: float, dt: float, what: str) -> int:
    n = round(span / dt)
    if n < 1 or abs(n * dt - span) > 1e-9 * max(1.0, span):
        raise ConfigError(f"{what}={span} is not a whole number of dt={dt} steps", key=what)
    return n


# -- config loading -----------------------------------------------------------

def _line_index(node, prefix=()):
    """Map key paths of a composed YAML node to 1-based line numbers."""
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (str(k.value),)
            lines[path] = k.start_mark.line + 1
            lines.update(_line_index(v, path))
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = prefix + (str(i),)
            lines[path] = v.start_mark.line + 1
            lines.update(_line_index(v, path))
    return lines


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Read a YAML scenario file. ``overrides`` replaces top-level keys."""
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}",
                          line=None if mark is None else mark.line + 1) from None
    if not isinstance(data, dict):
        raise ConfigError("scenario file must be a mapping", line=1)
    lines = _line_index(node) if node is not None else {}
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        if exc.line is None and exc.key is not None:
            path_ = tuple(exc.key.split("."))
            line = lines.get(path_)
            while line is None and len(path_) > 1:
                path_ = path_[:-1]
                line = lines.get(path_)
            msg = str(exc)
            raise ConfigError(msg, line=line if line is not None else 1, key=exc.key) from None
        raise


def _section(data: dict, name: str, allowed) -> dict:
    sec = data.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be a mapping", key=name)
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"unknown key '{k}' in '{name}'", key=f"{name}.{k}")
    return sec


def _build(cls, kwargs: dict, where: str):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        # point at the offending field when the message names one
        msg = str(exc)
        named = [k for k in kwargs if re.search(rf"\b{re.escape(k)}\b", msg)]
        key = f"{where}.{min(named, key=msg.find)}" if named else where
        raise ConfigError(f"{where}: {exc}", key=key) from None


def config_from_dict(data: dict) -> ScenarioConfig:
    for k in data:
        if k not in TOP_KEYS:
            raise ConfigError(f"unknown key '{k}'", key=k)
    for required in ("shape", "n_agents", "duration"):
        if required not in data:
            raise ConfigError(f"missing required key '{required}'", key=required)
    try:
        shape = shapes.from_config(data)
    except KeyError as exc:
        raise ConfigError(f"missing key '{exc.args[0]}' for shape "
                          f"'{data.get('shape')}'", key="shape") from None
    except ValueError as exc:
        raise ConfigError(str(exc), key="shape") from None

    n = int(data["n_agents"])
    seed = int(data.get("seed", 0))

    dyn = dict(_section(data, "dynamics", DYNAMICS_KEYS))
    # user files give deg/s; snapshots keep the exact radian value
    if "psi_rate_max" in dyn:
        dyn["psi_rate_max"] = math.radians(dyn["psi_rate_max"])
    if "psi_rate_max_rad" in dyn:
        dyn["psi_rate_max"] = dyn.pop("psi_rate_max_rad")
    dynamics_params = _build(DynamicsParams, dyn, "dynamics")

    ch = dict(_section(data, "channel", CHANNEL_KEYS))
    ch["seed"] = seed
    channel_cfg = _build(ChannelConfig, ch, "channel")

    base = dict(_section(data, "behavior", BEHAVIOR_KEYS))
    if "mode" not in base:
        raise ConfigError("missing key 'mode' in 'behavior'", key="behavior")
    agents = data.get("agents") or []
    if not isinstance(agents, list):
        raise ConfigError("'agents' must be a list", key="agents")
    if agents and len(agents) != n:
        # agents list shorter/longer than n_agents: extra entries ignored, missing use defaults
        agents = (agents + [{}] * n)[:n]
    per_agent = []
    poses = []
    for i in range(n):
        entry = dict(agents[i]) if i < len(agents) and agents[i] else {}
        if "psi" in entry:
            entry["psi_rad"] = math.radians(float(entry.pop("psi")))
        pose = tuple(entry.pop(k, None) for k in ("x", "y", "psi_rad"))
        for k in entry:
            if k not in BEHAVIOR_KEYS:
                raise ConfigError(f"unknown key '{k}' for agent {i}", key=f"agents.{i}.{k}")
        per_agent.append(_build(BehaviorConfig, {**base, **entry, "shape": shape},
                                f"agents.{i}" if entry else "behavior"))
        poses.append(pose)
    if all(None not in p for p in poses):
        initial = tuple((float(x), float(y), float(p)) for x, y, p in poses)
    elif all(p == (None, None, None) for p in poses):
        initial = None
    else:
        raise ConfigError("either every agent gives x, y, psi or none does", key="agents")

    flow = data.get("flow", (0.0, 0.0)) or (0.0, 0.0)
    if len(flow) != 2:
        raise ConfigError("flow must be [vx, vy]", key="flow")

    skip = data.get("metrics_skip")
    band = data.get("settle_band")
    start = data.get("start_radius")
    return ScenarioConfig(
        n_agents=n, duration=float(data["duration"]), shape=shape,
        behaviors=tuple(per_agent), dynamics=dynamics_params, channel=channel_cfg,
        flow=(float(flow[0]), float(flow[1])), initial_poses=initial, seed=seed,
        metrics_skip=None if skip is None else float(skip),
        log_every=int(data.get("log_every", 1)),
        settle_window=float(data.get("settle_window", 30.0)),
        settle_band=None if band is None else float(band),
        start_radius=None if start is None else float(start),
        name=str(data.get("name", "")),
    )


# -- engine -------------------------------------------------------------------

def random_poses(shape: shapes.ShapeSpec, n: int, seed: int, margin: float = 0.9,
                 start_radius: float | None = None) -> tuple:
    """Uniform start positions and headings.

    Positions are drawn within ``margin * R_d(theta)`` of the beacon, or
    within ``start_radius`` of it when given (agents released at the beacon).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    rmax = shape.max_radius if start_radius is None else start_radius
    poses = []
    while len(poses) < n:
        x, y = rng.uniform(-rmax, rmax, size=2)
        psi = rng.uniform(-math.pi, math.pi)
        r, th = math.hypot(x, y), math.atan2(y, x)
        limit = margin * shapes.radius_at(shape, th) if start_radius is None else start_radius
        if r <= limit:
            poses.append((float(x), float(y), float(psi)))
    return tuple(poses)


TRAJ_COLUMNS = ("t", "x", "y", "u", "v", "psi", "psi_cmd")
SAMPLE_COLUMNS = ("agent_id", "t_meas", "t_recv", "r", "u_r", "source")
COMMAND_COLUMNS = ("t", "psi_cmd", "fx", "reason")


@dataclass
class RunLog:
    config: dict
    trajectories: list  # per agent: ndarray (n, len(TRAJ_COLUMNS))
    samples: list  # per agent: list of RangeSample rows
    commands: list  # per agent: list of Command rows
    version: str = __version__

    def trajectory(self, agent_id: int) -> Trajectory:
        a = self.trajectories[agent_id]
        return Trajectory(agent_id, a[:, 0], a[:, 1], a[:, 2], a[:, 5])

    def all_trajectories(self) -> list:
        return [self.trajectory(i) for i in range(len(self.trajectories))]

    def scenario(self) -> ScenarioConfig:
        return config_from_dict(self.config)

    def diff(self, other: "RunLog") -> str | None:
        """First difference from ``other`` in human-readable form, or None."""
        if self.config != other.config:
            return "config snapshots differ"
        if len(self.trajectories) != len(other.trajectories):
            return "agent count differs"
        for i, (a, b) in enumerate(zip(self.trajectories, other.trajectories)):
            if a.shape != b.shape:
                return f"agent {i}: trajectory length {a.shape[0]} vs {b.shape[0]}"
            bad = np.flatnonzero(np.any(a != b, axis=1))
            if len(bad):
                return f"agent {i}: trajectory diverges at t={a[bad[0], 0]}"
        for kind in ("samples", "commands"):
            for i, (a, b) in enumerate(zip(getattr(self, kind), getattr(other, kind))):
                if len(a) != len(b):
                    return f"agent {i}: {len(a)} vs {len(b)} {kind}"
                for j, (ra, rb) in enumerate(zip(a, b)):
                    if tuple(ra) != tuple(rb):
                        return f"agent {i}: {kind[:-1]} #{j} differs: {tuple(ra)} vs {tuple(rb)}"
        return None

    def __eq__(self, other):
        if not isinstance(other, RunLog):
            return NotImplemented
        return self.version == other.version and self.diff(other) is None

    # persistence ---------------------------------------------------------

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for i in range(len(self.trajectories)):
            names = {k: f"{k}_agent{i}.csv" for k in ("trajectory", "samples", "commands")}
            _write_csv(out / names["trajectory"], TRAJ_COLUMNS, self.trajectories[i].tolist())
            _write_csv(out / names["samples"], SAMPLE_COLUMNS, self.samples[i])
            _write_csv(out / names["commands"], COMMAND_COLUMNS, self.commands[i])
            files.append(names)
        manifest = {"format": "auvbound-runlog", "version": self.version,
                    "config": self.config, "agents": files}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return out

    @classmethod
    def load(cls, run_dir) -> "RunLog":
        d = Path(run_dir)
        try:
            manifest = json.loads((d / "manifest.json").read_text())
        except FileNotFoundError:
            raise ValueError(f"{d}: no manifest.json; not a run log directory") from None
        except json.JSONDecodeError as exc:
            raise ValueError(f"{d}/manifest.json: corrupt ({exc})") from None
        if manifest.get("format") != "auvbound-runlog":
            raise ValueError(f"{d}/manifest.json: not an auvbound run log")
        trajs, samples, commands = [], [], []
        for entry in manifest["agents"]:
            rows = _read_csv(d / entry["trajectory"], TRAJ_COLUMNS)
            trajs.append(np.array([[float(v) for v in row] for row in rows], dtype=float)
                         .reshape(-1, len(TRAJ_COLUMNS)))
            samples.append([_sample_row(row) for row in _read_csv(d / entry["samples"], SAMPLE_COLUMNS)])
            commands.append([(float(t), float(p), float(f), reason)
                             for t, p, f, reason in _read_csv(d / entry["commands"], COMMAND_COLUMNS)])
        return cls(manifest["config"], trajs, samples, commands, manifest["version"])


def _num(v):
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def _read_csv(path, header):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise ValueError(f"missing run log file {path}") from None
    if not rows or tuple(rows[0]) != tuple(header):
        raise ValueError(f"{path}: unexpected header")
    body = rows[1:]
    for n, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
    return body


def _sample_row(row):
    aid, tm, tr, r, ur, src = row
    return (int(aid), float(tm), float(tr), None if r == "" else float(r),
            None if ur == "" else float(ur), src)


def run(config: ScenarioConfig) -> RunLog:
    """Simulate ``config`` and return its full log."""
    dyn = config.dynamics
    dt = dyn.dt
    n_steps = _steps(config.duration, dt, "duration")
    per_slot = _steps(config.channel.slot_time, dt, "channel.slot_time")
    per_tick = [_steps(b.heading_update_dt, dt, "behavior.heading_update_dt")
                for b in config.behaviors]
    flow = config.flow
    N = config.n_agents
    ch_cfg = replace(config.channel, seed=config.seed)
    link = chan.Channel(ch_cfg, N)
    doppler = ch_cfg.rate_source == "doppler"

    poses = config.initial_poses or random_poses(config.shape, N, config.seed,
                                                 start_radius=config.start_radius)
    states = [AgentState(x=x, y=y, psi=psi, psi_cmd=psi, fx=b.fx)
              for (x, y, psi), b in zip(poses, config.behaviors)]
    bstates = [behaviors.initial_state(b, psi) for (_, _, psi), b in zip(poses, config.behaviors)]
    snapshot = list(states)

    compass = [[] for _ in range(N)]  # heading at every step, per agent
    last_meas = [None] * N  # t_meas of the previous delivered range
    traj_rows = [[] for _ in range(N)]
    sample_rows = [[] for _ in range(N)]
    command_rows = [[] for _ in range(N)]

    def deliver(j, sample, t):
        if sample is None:
            return
        sample_rows[j].append(sample.to_row())
        bstates[j], cmd = behaviors.on_sample(bstates[j], config.behaviors[j], sample,
                                              states[j].psi, rate_heading(j, sample))
        apply(j, cmd)

    def rate_heading(j, sample):
        # heading the agent held while the range rate was being measured
        n1 = round(sample.t_meas / dt)
        if sample.r is not None and not doppler:
            prev, last_meas[j] = last_meas[j], sample.t_meas
            n0 = n1 if prev is None else round(prev / dt)
        else:
            n0 = n1
        return behaviors.interval_heading(compass[j][n0:n1 + 1])

    def apply(j, cmd):
        command_rows[j].append(cmd.to_row())
        if cmd.psi_cmd != states[j].psi_cmd or cmd.fx != states[j].fx:
            states[j] = replace(states[j], psi_cmd=cmd.psi_cmd, fx=cmd.fx)

    for n in range(n_steps + 1):
        t = n * dt
        if n % config.log_every == 0 or n == n_steps:
            for j, s in enumerate(states):
                traj_rows[j].append((t, s.x, s.y, s.u, s.v, s.psi, s.psi_cmd))
        if n == n_steps:
            break
        for j, s in enumerate(states):
            compass[j].append(s.psi)
        if n > 0 and n % per_slot == 0:
            msg = chan.schedule_slot(ch_cfg, N, n // per_slot - 1)
            agent, kind = msg
            if kind in (chan.RANGE, chan.ACK):
                deliver(agent, link.measure_range(snapshot[agent], agent, t, flow), t)
            if doppler and kind in (chan.RANGE, chan.BROADCAST):
                for j in range(N):
                    if kind == chan.RANGE and j == agent:
                        continue
                    deliver(j, link.measure_doppler(states[j], j, t, flow), t)
            snapshot = list(states)
        if n > 0:
            for j, b in enumerate(config.behaviors):
                if n % per_tick[j] == 0:
                    bstates[j], cmd = behaviors.on_heading_tick(bstates[j], b, t)
                    if cmd is not None:
                        apply(j, cmd)
        states = [dynamics.step(s, dyn, flow) for s in states]

    return RunLog(
        config=config.to_dict(),
        trajectories=[np.array(rows, dtype=float) for rows in traj_rows],
        samples=sample_rows,
        commands=command_rows,
    )


def replay(log: RunLog) -> RunLog:
    """Re-run ``log`` from its config snapshot; raise :class:`ReplayError` on any difference."""
    if log.version != __version__:
        raise ReplayError(f"log written by version {log.version}, this is {__version__}")
    fresh = run(log.scenario())
    problem = log.diff(fresh)
    if problem is not None:
        raise ReplayError(f"replay diverged: {problem}")
    return fresh


def report(log: RunLog, label: str = "") -> MetricsReport:
    """Fencing or milling scores for a run, depending on its behavior."""
    cfg = log.scenario()
    trajs = log.all_trajectories()
    fx = cfg.behaviors[0].fx
    if cfg.mode.endswith("fence"):
        return fencing_report(trajs, cfg.shape, behavior=cfg.mode, skip=cfg.metrics_skip or 0.0,
                              fx=fx, label=label or cfg.name)
    return milling_report(trajs, cfg.shape, behavior=cfg.mode, skip=cfg.metrics_skip,
                          settle_window=cfg.settle_window, settle_band=cfg.settle_band,
                          fx=fx, label=label or cfg.name)


def make_config(mode: str, shape: shapes.ShapeSpec, n_agents: int = 1, duration: float = 1000.0,
                seed: int = 0, flow=(0.0, 0.0), dynamics_params: DynamicsParams | None = None,
                channel_cfg: ChannelConfig | None = None, initial_poses=None,
                metrics_skip: float | None = None, start_radius: float | None = None,
                name: str = "", **behavior_kw) -> ScenarioConfig:
    """Convenience constructor with one behavior shared by all agents."""
    b = BehaviorConfig(mode=mode, shape=shape, **behavior_kw)
    return ScenarioConfig(
        n_agents=n_agents, duration=duration, shape=shape, behaviors=(b,) * n_agents,
        dynamics=dynamics_params or DynamicsParams(), channel=channel_cfg or ChannelConfig(),
        flow=tuple(flow), initial_poses=initial_poses, seed=seed, metrics_skip=metrics_skip,
        start_radius=start_radius, name=name,
    )
