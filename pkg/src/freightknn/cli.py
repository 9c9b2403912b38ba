"""Command-line entry point: ``freightknn [global flags] <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, pipeline

COMMANDS = ("synth", "ingest", "segment", "train", "backtest", "baseline", "compare",
            "simulate", "report", "pipeline")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="master seed")
    parser.add_argument("--config", default=default, metavar="JSON",
                        help="JSON file overriding the default configuration")
    parser.add_argument("--out", default=argparse.SUPPRESS if suppress else "out",
                        help="output directory (default: out)")
    parser.add_argument("--paper-fidelity", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="22,500 random-search iterations and a 2,500-iteration simplex cap")
    parser.add_argument("--workers", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker threads; results never depend on this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freightknn",
        description="Freight cost estimation by weighted nearest-neighbor analogy.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    # Global flags are accepted after the subcommand too.
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic job log")
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--n-lanes", type=int)
    p.add_argument("--spec", metavar="JSON", help="synthetic-data spec file")

    p = sub.add_parser("ingest", parents=[common], help="validate and import a job CSV")
    p.add_argument("input", help="CSV file with the job schema")

    sub.add_parser("segment", parents=[common], help="split into test/historical/training")

    p = sub.add_parser("train", parents=[common], help="train attribute weights per k")
    p.add_argument("--k", type=int, nargs="+", help="k values (default 1..6)")

    p = sub.add_parser("backtest", parents=[common], help="walk-forward trials")
    p.add_argument("--trial", choices=("1", "2", "both"), default="both",
                   help="1 = trained weights, 2 = all-ones weights")

    sub.add_parser("baseline", parents=[common], help="stepwise regression and min-combination")
    sub.add_parser("compare", parents=[common], help="trained vs untrained, method table")
    sub.add_parser("simulate", parents=[common], help="indifference cost and sensitivity sweep")
    sub.add_parser("report", parents=[common], help="summary JSON and CSV exports")

    p = sub.add_parser("pipeline", parents=[common], help="run every step in order")
    p.add_argument("--input", help="ingest this CSV instead of generating data")
    return parser


def _load_config(args) -> dict:
    user = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            user = json.load(fh)
    if args.command == "synth":
        extra = {}
        if args.spec:
            with open(args.spec, encoding="utf-8") as fh:
                extra = json.load(fh)
        if args.n_jobs is not None:
            extra["n_jobs"] = args.n_jobs
        if args.n_lanes is not None:
            extra["n_lanes"] = args.n_lanes
        user = pipeline.merge_config(user, {"synth": extra}) if extra else user
    if args.command == "train" and args.k:
        user = pipeline.merge_config(user, {"train": {"k_range": args.k}})
    return pipeline.build_config(user, args.seed, args.paper_fidelity)


def _run(args) -> None:
    ws = pipeline.Workspace(args.out, _load_config(args), workers=args.workers)
    cmd = args.command
    if cmd == "synth":
        ds = pipeline.run_synth(ws)
        print(f"wrote {len(ds)} jobs to {ws.path('data/jobs.csv')}")
    elif cmd == "ingest":
        ds, rejected = pipeline.run_ingest(ws, args.input)
        print(f"accepted {len(ds)} jobs, rejected {len(rejected)}")
        for r in rejected:
            print(r.to_json(), file=sys.stderr)
    elif cmd == "segment":
        seg = pipeline.run_segment(ws)
        print(f"test {len(seg.test)}, historical {len(seg.historical)}, "
              f"training {len(seg.training)}")
    elif cmd == "train":
        for k, m in pipeline.run_train(ws).items():
            print(f"k={k} training MAPE {m.training_mape:.3f}% "
                  f"(random search {m.random_search_mape:.3f}%)")
    elif cmd == "backtest":
        trials = (1, 2) if args.trial == "both" else (int(args.trial),)
        for (t, k), r in pipeline.run_backtest(ws, trials).items():
            print(f"trial {t} k={k} MAPE {r.mape:.3f}% over {len(r.rows)} jobs")
    elif cmd == "baseline":
        b = pipeline.run_baseline(ws)
        print(f"regression MAPE {b['regression']['mape']:.3f}%, "
              f"combined MAPE {b['combined_min']['mape']:.3f}%")
    elif cmd == "compare":
        for c in pipeline.run_compare(ws)["trained_vs_untrained"]:
            print(f"k={c['k']} trained {c['trained_mape']:.3f}% vs untrained "
                  f"{c['untrained_mape']:.3f}%, p={c['p_value']:.4g} ({c['conclusion']})")
    elif cmd == "simulate":
        for name, a in pipeline.run_simulate(ws)["arms"].items():
            print(f"{name}: indifference cost {a['indifference_cost']:.2f} EUR "
                  f"(95% CI {a['ci'][0]:.2f} to {a['ci'][1]:.2f})")
    elif cmd == "report":
        pipeline.run_report(ws)
        print(f"wrote {ws.path('reports/summary.json')}")
    elif cmd == "pipeline":
        pipeline.run_all(ws, args.input)
        print(f"pipeline complete in {ws.root}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _run(args)
    except (pipeline.PipelineError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
