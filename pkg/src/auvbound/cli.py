"""
Command-line front end.

    auvbound run SCENARIO.yaml [--out DIR] [--seed N] [--agents N] [--duration S]
    auvbound metrics RUN_DIR [RUN_DIR ...] [--table] [--json]
    auvbound campaign {fencing_heb,fencing_rvb,milling_heb,milling_rvb} [--out DIR]
    auvbound replay RUN_DIR

Exit status: 0 success, 1 domain error (bad config, corrupt or diverging
log), 2 usage error. Output directories default to ``$AUVBOUND_OUT`` (or
``./auvbound_out`` when unset).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .campaigns import CAMPAIGNS, run_campaign, write_metrics, write_plot_data
from .metrics import MetricsReport, render_table
from .scenario import ConfigError, ReplayError, RunLog, load_config, replay, report, run

ENV_OUT = "AUVBOUND_OUT"
EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def default_out_root() -> Path:
    return Path(os.environ.get(ENV_OUT) or "auvbound_out")


def _fmt(v):
    return "-" if v is None else f"{v:.3f}" if isinstance(v, float) else str(v)


def format_report(rep: MetricsReport) -> str:
    head = f"{rep.label or rep.behavior}: {rep.behavior}, {rep.n_agents} agent(s)"
    if rep.behavior.endswith("fence"):
        n_done = sum(d.complete for d in rep.dips)
        body = (f"  dips={len(rep.dips)} (complete {n_done})  MRE={_fmt(rep.MRE)} m  "
                f"MPE={_fmt(rep.MPE)} m  ART={_fmt(rep.ART)} s")
    else:
        body = (f"  MRE={_fmt(rep.MRE)} m  r_mean={_fmt(rep.r_mean)} m  "
                f"accuracy={_fmt(rep.accuracy)} m  precision={_fmt(rep.precision)} m  "
                f"settle={_fmt(rep.settle_time)} s")
    return head + "\n" + body


def cmd_run(args) -> int:
    overrides = {"seed": args.seed, "n_agents": args.agents, "duration": args.duration}
    cfg = load_config(args.config, overrides)
    out = Path(args.out) if args.out else default_out_root() / Path(args.config).stem
    log = run(cfg)
    log.save(out)
    rep = report(log)
    write_metrics(rep, out / "metrics.json")
    if args.plot:
        write_plot_data(log, out / "plot", every=args.plot_every)
    print(format_report(rep))
    print(f"wrote {out}")
    return EXIT_OK


def _load_report(run_dir: Path) -> MetricsReport:
    """Recompute metrics from the stored log (metrics.json is only a cache)."""
    return report(RunLog.load(run_dir))


def cmd_metrics(args) -> int:
    reports = [_load_report(Path(d)) for d in args.run_dirs]
    if args.json:
        payload = [r.to_dict() for r in reports]
        print(json.dumps(payload if len(payload) > 1 else payload[0], indent=2, sort_keys=True))
    elif args.table:
        sys.stdout.write(render_table(reports))
    else:
        print("\n".join(format_report(r) for r in reports))
    return EXIT_OK


def cmd_campaign(args) -> int:
    if args.name not in CAMPAIGNS:
        print(f"unknown campaign {args.name!r}; valid campaigns: {', '.join(CAMPAIGNS)}",
              file=sys.stderr)
        return EXIT_USAGE
    out_root = Path(args.out) if args.out else default_out_root()
    res = run_campaign(args.name, out_root, seed=args.seed, duration=args.duration,
                       workers=args.workers, plot_every=args.plot_every)
    sys.stdout.write(res.table())
    print(f"wrote {res.out_dir}")
    return EXIT_OK


def cmd_replay(args) -> int:
    log = RunLog.load(Path(args.run_dir))
    replay(log)
    print(f"replay of {args.run_dir} is exact")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="auvbound",
                                description="Range-only fencing and milling simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario file")
    r.add_argument("config", help="YAML scenario file")
    r.add_argument("--out", help=f"output directory (default ${ENV_OUT}/<config name>)")
    r.add_argument("--seed", type=int)
    r.add_argument("--agents", type=int)
    r.add_argument("--duration", type=float)
    r.add_argument("--plot", action="store_true", help="also write x,y and r(t) series")
    r.add_argument("--plot-every", type=int, default=20, help="thin plot data (steps)")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="score stored runs")
    m.add_argument("run_dirs", nargs="+")
    g = m.add_mutually_exclusive_group()
    g.add_argument("--table", action="store_true", help="comparison table")
    g.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("campaign", help="run a predefined sweep",
                       description=f"campaigns: {', '.join(CAMPAIGNS)}")
    c.add_argument("name", help=", ".join(CAMPAIGNS))
    c.add_argument("--out", help=f"output root (default ${ENV_OUT})")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--duration", type=float, default=1000.0)
    c.add_argument("--workers", type=int, default=None)
    c.add_argument("--plot-every", type=int, default=20)
    c.set_defaults(func=cmd_campaign)

    rp = sub.add_parser("replay", help="re-run a stored log and check it is reproduced exactly")
    rp.add_argument("run_dir")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: --help (0) or usage error (2)
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {args.__dict__.get('config', '')}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ReplayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
