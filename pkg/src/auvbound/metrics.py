"""
Fencing and milling scores computed from trajectories.

Fencing is scored per *dip*: the stretch between leaving the boundary and
re-entering it. Boundary crossings are located by linear interpolation of the
radial error between samples, so return times do not depend on the logging
step.

Milling is scored on the radial error ``e = r - R_d(theta)`` after the agent
has settled onto the path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import shapes
from .shapes import ShapeSpec


@dataclass(frozen=True)
class Trajectory:
    agent_id: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.psi) == n):
            raise ValueError("trajectory columns differ in length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    @property
    def theta(self) -> np.ndarray:
        return np.arctan2(self.y, self.x)

    def after(self, t0: float) -> "Trajectory":
        keep = self.t >= t0
        return Trajectory(self.agent_id, self.t[keep], self.x[keep], self.y[keep], self.psi[keep])

    @classmethod
    def from_polar(cls, t, r, theta, psi=None, agent_id: int = 0) -> "Trajectory":
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), t.shape)
        psi = np.zeros_like(t) if psi is None else np.asarray(psi, dtype=float)
        return cls(agent_id, t, r * np.cos(theta), r * np.sin(theta), psi)


@dataclass(frozen=True)
class Dip:
    t_start: float
    t_end: float
    peak: float
    return_time: float
    complete: bool
    t_peak: float = 0.0
    peak_x: float = 0.0
    peak_y: float = 0.0
    agent_id: int = 0


def radial_error(traj: Trajectory, shape: ShapeSpec) -> np.ndarray:
    return traj.r - shapes.radius_at(shape, traj.theta)


def _crossing(t0, e0, t1, e1):
    """Time at which the linear interpolant of e between two samples hits 0."""
    if e1 == e0:
        return t1
    return t0 + (0.0 - e0) / (e1 - e0) * (t1 - t0)


def segment_dips(traj: Trajectory, shape: ShapeSpec) -> list[Dip]:
    """Split the outside-boundary time into dips.

    A dip that is still open when the record ends is closed at the minimum
    outside range reached after its peak and marked ``complete=False``.
    """
    t = traj.t
    if len(t) == 0:
        raise ValueError("empty trajectory")
    e = radial_error(traj, shape)
    outside = e > 0
    if not outside.any():
        return []
    padded = np.concatenate(([False], outside, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1  # inclusive last outside index
    last = len(t) - 1
    dips = []
    for i0, i1 in zip(starts, stops):
        seg = e[i0:i1 + 1]
        ip = i0 + int(np.argmax(seg))
        peak = float(e[ip])
        t_start = float(t[0]) if i0 == 0 else _crossing(t[i0 - 1], e[i0 - 1], t[i0], e[i0])
        if i1 < last:
            t_end = _crossing(t[i1], e[i1], t[i1 + 1], e[i1 + 1])
            complete = True
        else:
            imin = ip + int(np.argmin(e[ip:i1 + 1]))
            t_end = float(t[imin])
            complete = False
        dips.append(Dip(
            t_start=float(t_start), t_end=float(t_end), peak=peak,
            return_time=float(t_end - t_start), complete=complete,
            t_peak=float(t[ip]), peak_x=float(traj.x[ip]), peak_y=float(traj.y[ip]),
            agent_id=traj.agent_id,
        ))
    return dips


@dataclass(frozen=True)
class FencingScores:
    MRE: float | None
    MPE: float | None
    ART: float | None
    n_dips: int
    n_complete: int


def fencing_metrics(dips) -> FencingScores:
    """Maximum peak, mean peak, and mean return time over complete dips."""
    dips = list(dips)
    if not dips:
        return FencingScores(None, None, None, 0, 0)
    peaks = [d.peak for d in dips]
    done = [d.return_time for d in dips if d.complete]
    art = sum(done) / len(done) if done else None
    return FencingScores(max(peaks), sum(peaks) / len(peaks), art, len(dips), len(done))


@dataclass(frozen=True)
class MillingScores:
    MRE: float
    r_mean: float
    accuracy: float
    precision: float
    settle_time: float | None
    N: int


def settle_time(t: np.ndarray, e: np.ndarray, band: float, window: float) -> float | None:
    """First time after which ``|e| <= band`` holds to the end of the record.

    At least ``window`` seconds must remain after that time, otherwise the
    run is considered unsettled.
    """
    out = np.flatnonzero(np.abs(e) > band)
    idx = 0 if len(out) == 0 else int(out[-1]) + 1
    if idx >= len(t):
        return None
    if t[-1] - t[idx] < window:
        return None
    return float(t[idx])


def default_band(shape: ShapeSpec) -> float:
    return 0.1 * (shape.R0 if shape.is_circle else shape.max_radius)


def _pooled(trajs, shape, starts):
    rs, es = [], []
    for tr, t0 in zip(trajs, starts):
        keep = tr.t >= t0
        rs.append(tr.r[keep])
        es.append(radial_error(tr, shape)[keep])
    return np.concatenate(rs), np.concatenate(es)


def milling_metrics(traj, shape: ShapeSpec, settle_window: float = 30.0,
                    settle_band: float | None = None, skip: float | None = None) -> MillingScores:
    """Milling scores for one trajectory or a list of them (pooled samples).

    MRE is the largest outward overshoot over the whole record, transient
    included. The other statistics are taken from each agent's settling time
    onward, or from ``skip`` when given; agents that never settle contribute
    their whole record. ``settle_time`` is the mean over the agents that
    settled.
    """
    trajs = [traj] if isinstance(traj, Trajectory) else list(traj)
    if not trajs or any(len(tr.t) == 0 for tr in trajs):
        raise ValueError("empty trajectory")
    band = default_band(shape) if settle_band is None else settle_band
    settles = [settle_time(tr.t, radial_error(tr, shape), band, settle_window) for tr in trajs]
    if skip is not None:
        starts = [skip] * len(trajs)
    else:
        starts = [s if s is not None else tr.t[0] for s, tr in zip(settles, trajs)]
    r, e = _pooled(trajs, shape, starts)
    if len(r) == 0:
        raise ValueError("no samples left after skipping the transient")
    r_mean = float(np.mean(r))
    got = [s for s in settles if s is not None]
    overshoot = max(float(np.max(radial_error(tr, shape))) for tr in trajs)
    return MillingScores(
        MRE=max(0.0, overshoot),
        r_mean=r_mean,
        accuracy=float(np.mean(e)),
        precision=float(math.sqrt(np.mean((r - r_mean) ** 2))),
        settle_time=(sum(got) / len(got)) if got else None,
        N=int(len(r)),
    )


@dataclass
class MetricsReport:
    behavior: str
    n_agents: int
    dips: list = field(default_factory=list)
    MRE: float | None = None
    MPE: float | None = None
    ART: float | None = None
    r_mean: float | None = None
    accuracy: float | None = None
    precision: float | None = None
    settle_time: float | None = None
    N: int = 0
    fx: float | None = None
    label: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dips"] = [asdict(dip) for dip in self.dips]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["dips"] = [Dip(**dip) for dip in d.get("dips", [])]
        return cls(**d)


def fencing_report(trajs, shape: ShapeSpec, behavior: str = "fence", skip: float = 0.0,
                   **extra) -> MetricsReport:
    """Pool dips of all agents; dips starting before ``skip`` are ignored."""
    trajs = list(trajs)
    dips = []
    for tr in trajs:
        dips.extend(d for d in segment_dips(tr, shape) if d.t_start >= skip)
    sc = fencing_metrics(dips)
    n = sum(len(tr.t) for tr in trajs)
    return MetricsReport(behavior=behavior, n_agents=len(trajs), dips=dips,
                         MRE=sc.MRE, MPE=sc.MPE, ART=sc.ART, N=n, **extra)


def milling_report(trajs, shape: ShapeSpec, behavior: str = "mill", skip: float | None = None,
                   settle_window: float = 30.0, settle_band: float | None = None,
                   **extra) -> MetricsReport:
    trajs = list(trajs)
    sc = milling_metrics(trajs, shape, settle_window, settle_band, skip)
    return MetricsReport(behavior=behavior, n_agents=len(trajs), MRE=sc.MRE,
                         r_mean=sc.r_mean, accuracy=sc.accuracy, precision=sc.precision,
                         settle_time=sc.settle_time, N=sc.N, **extra)


FENCING_COLUMNS = ("label", "n_agents", "fx", "MRE", "MPE", "ART")
MILLING_COLUMNS = ("label", "n_agents", "fx", "MRE", "precision", "accuracy")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def render_table(reports, delimiter: str = "\t") -> str:
    """Comparison table with one header per behavior family and one row per run.

    Fencing and milling rows get their own header; rows are ordered by agent
    count within each group.
    """
    reports = list(reports)
    lines = []
    for kind, cols in (("fence", FENCING_COLUMNS), ("mill", MILLING_COLUMNS)):
        group = [rp for rp in reports if rp.behavior.endswith(kind)]
        if not group:
            continue
        group.sort(key=lambda rp: (rp.behavior, rp.n_agents, rp.label))
        lines.append(delimiter.join(cols))
        for rp in group:
            lines.append(delimiter.join(_fmt(getattr(rp, c)) for c in cols))
    return "\n".join(lines) + "\n"
