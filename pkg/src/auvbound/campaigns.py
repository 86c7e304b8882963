"""
Predefined simulation sweeps.

Each campaign is a list of named scenarios (1, 2 and 3 agents, on every
shape the controller supports). Runs are independent, so they are farmed out
to a process pool; results come back in definition order, which keeps every
output file byte-for-byte reproducible.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import shapes
from .metrics import MetricsReport, radial_error, render_table
from .scenario import RunLog, ScenarioConfig, make_config, report, run

AGENT_COUNTS = (1, 2, 3)


def _fence_shapes():
    return {"circle30": shapes.circle(30.0), "square60": shapes.square(60.0),
            "star30": shapes.isotoxal_star(30.0, 10.0)}


def _fencing_heb(seed, duration):
    return [(f"{name}_n{n}", make_config("heb_fence", shp, n_agents=n, duration=duration,
                                         seed=seed, name=f"{name}_n{n}"))
            for name, shp in _fence_shapes().items() for n in AGENT_COUNTS]


def _fencing_rvb(seed, duration):
    shp = shapes.circle(30.0)
    return [(f"circle30_n{n}", make_config("rvb_fence", shp, n_agents=n, duration=duration,
                                           seed=seed, name=f"circle30_n{n}"))
            for n in AGENT_COUNTS]


def _milling_heb(seed, duration):
    # agents are released next to the beacon and have to find the path first
    return [(f"{name}_n{n}", make_config("heb_mill", shp, n_agents=n, duration=duration,
                                         seed=seed, start_radius=0.5, name=f"{name}_n{n}",
                                         k=20.0, k_rate=0.0))
            for name, shp in _fence_shapes().items() for n in AGENT_COUNTS]


def _milling_rvb(seed, duration):
    out = []
    for name, shp in (("circle30", shapes.circle(30.0)), ("circle2", shapes.circle(2.0))):
        for n in AGENT_COUNTS:
            out.append((f"{name}_n{n}", make_config("rvb_mill", shp, n_agents=n,
                                                    duration=duration, seed=seed,
                                                    name=f"{name}_n{n}")))
    return out


CAMPAIGNS = {
    "fencing_heb": _fencing_heb,
    "fencing_rvb": _fencing_rvb,
    "milling_heb": _milling_heb,
    "milling_rvb": _milling_rvb,
}


@dataclass
class CampaignResult:
    name: str
    labels: list
    reports: list  # MetricsReport per run
    out_dir: Path | None = None

    def table(self, delimiter: str = "\t") -> str:
        return render_table(self.reports, delimiter)


def campaign_configs(name: str, seed: int = 0, duration: float = 1000.0) -> list:
    """``[(label, ScenarioConfig), ...]`` for a named campaign."""
    try:
        build = CAMPAIGNS[name]
    except KeyError:
        raise KeyError(f"unknown campaign {name!r}; choose from {', '.join(CAMPAIGNS)}") from None
    return build(seed, duration)


def _run_one(config: ScenarioConfig):
    log = run(config)
    return log, report(log)


def write_plot_data(log: RunLog, out_dir, every: int = 20, delimiter: str = "\t") -> tuple:
    """Write tidy ``x, y`` and ``r(t)`` series, one row per agent sample.

    ``every`` thins the logged steps (20 steps = 1 s at the default dt).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shape = log.scenario().shape
    xy_path, r_path = out / "xy.tsv", out / "range.tsv"
    with open(xy_path, "w") as fxy, open(r_path, "w") as fr:
        fxy.write(delimiter.join(("agent", "t", "x", "y")) + "\n")
        fr.write(delimiter.join(("agent", "t", "r", "e")) + "\n")
        for tr in log.all_trajectories():
            idx = np.arange(0, len(tr.t), every)
            e = radial_error(tr, shape)
            r = tr.r
            for i in idx:
                fxy.write(f"{tr.agent_id}{delimiter}{tr.t[i]!r}{delimiter}{tr.x[i]!r}"
                          f"{delimiter}{tr.y[i]!r}\n")
                fr.write(f"{tr.agent_id}{delimiter}{tr.t[i]!r}{delimiter}{r[i]!r}"
                         f"{delimiter}{e[i]!r}\n")
    return xy_path, r_path


def write_metrics(rep: MetricsReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def run_campaign(name: str, out_dir=None, seed: int = 0, duration: float = 1000.0,
                 workers: int | None = None, plot_every: int = 20) -> CampaignResult:
    """Run every scenario of a campaign; write logs, metrics and plot data if ``out_dir``."""
    items = campaign_configs(name, seed, duration)
    labels = [label for label, _ in items]
    configs = [cfg for _, cfg in items]
    if workers is None:
        workers = min(len(configs), os.cpu_count() or 1)
    if workers <= 1:
        results = [_run_one(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, configs))
    reports = [rep for _, rep in results]
    out = None
    if out_dir is not None:
        out = Path(out_dir) / name
        for label, (log, rep) in zip(labels, results):
            run_dir = out / label
            log.save(run_dir)
            write_metrics(rep, run_dir / "metrics.json")
            write_plot_data(log, run_dir / "plot", every=plot_every)
        (out / "summary.tsv").write_text(render_table(reports))
    return CampaignResult(name, labels, reports, out)
