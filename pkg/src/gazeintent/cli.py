"""Experiment command line.

Subcommands: ``run`` (one cross-validated grid search), ``sweep`` (rerun per
window length), ``timing`` (train/test wall-clock report), ``synth``
(generate a synthetic corpus). Exit codes: 0 success, 2 missing input file,
3 malformed data file, 4 invalid configuration, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .io import (
    MalformedFileError,
    load_layout,
    sample_layout_path,
    write_csv,
    write_events_csv,
    write_gaze_csv,
)
from .pipeline import (
    ConfigError,
    emit_reports,
    load_config,
    run_experiment,
    sensitivity_sweep,
    timing_report,
)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_MISSING_FILE = 2
EXIT_MALFORMED = 3
EXIT_BAD_CONFIG = 4


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--tau", type=float, default=None, help="window length in seconds")
    p.add_argument("--folds", type=int, default=None, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--out", required=True, help="output directory")


def _overrides(args) -> dict:
    out = {}
    if args.tau is not None:
        out["tau"] = args.tau
    if args.folds is not None:
        out["folds"] = args.folds
    if args.seed is not None:
        out["seed"] = args.seed
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeintent",
        description="Visit-intention prediction experiments over gaze corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one cross-validated experiment")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="rerun the experiment per window length")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--taus", type=float, nargs="+", default=[3.0, 5.0, 10.0, 15.0, 20.0],
        help="window lengths to sweep",
    )

    p_tim = sub.add_parser("timing", help="train/test wall-clock per model family")
    _add_common(p_tim)
    p_tim.add_argument(
        "--taus", type=float, nargs="+", default=None,
        help="window lengths to time (default: the config's tau)",
    )
    p_tim.add_argument("--repeats", type=int, default=3)

    p_syn = sub.add_parser("synth", help="generate a synthetic gaze corpus")
    p_syn.add_argument("--layout", default=None, help="layout JSON (default: bundled page)")
    p_syn.add_argument("--users", type=int, default=51)
    p_syn.add_argument("--sessions", type=int, default=3)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = run_experiment(cfg)
    emit_reports(result, args.out)
    best = result.best_key
    print(f"best: {best[0]} selection={best[1]} m={best[2]} param={best[3]}")
    print(f"reports written to {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    results = sensitivity_sweep(cfg, taus=args.taus)
    emit_reports(results, args.out)
    print(f"swept tau={args.taus}; reports written to {args.out}")
    return EXIT_OK


def _cmd_timing(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = timing_report(cfg, taus=args.taus, repeats=args.repeats)
    emit_reports(result, args.out)
    over = [r for r in result["rows"] if not r["within_budget"]]
    print(f"timed {len(result['rows'])} (tau, model) cells; over budget: {len(over)}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    from .synth import default_profile, generate_cohort

    layout_path = Path(args.layout) if args.layout else sample_layout_path()
    if not layout_path.exists():
        raise FileNotFoundError(layout_path)
    layout = load_layout(layout_path)
    profile = default_profile(layout)
    signals, events = generate_cohort(
        layout, profile, args.users, args.sessions, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_gaze_csv(out / "gaze.csv", signals)
    write_events_csv(out / "events.csv", events)
    (out / "layout.json").write_text(layout_path.read_text())
    config = {
        "gaze_csv": str(out / "gaze.csv"),
        "events_csv": str(out / "events.csv"),
        "layout": str(out / "layout.json"),
        "tau": 5.0,
        "folds": 10,
        "seed": args.seed,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(signals)} signals to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "timing": _cmd_timing,
        "synth": _cmd_synth,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: missing input file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except MalformedFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
