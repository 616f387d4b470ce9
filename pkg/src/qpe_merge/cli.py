"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure. Log verbosity comes from the QPE_MERGE_LOG environment
variable (DEBUG, INFO, WARNING, ERROR; default WARNING).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DataError, NumericError, QpeMergeError
from .pipeline import evaluate_predictions, ingest_check, run_pipeline, train_single
from .render import render_run
from .version import __version__

LOG_ENV_VAR = "QPE_MERGE_LOG"


class _Parser(argparse.ArgumentParser):
    """Usage problems exit 1 (argparse's default of 2 is our data-error code)."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _configure_logging() -> None:
    name = os.environ.get(LOG_ENV_VAR, "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpe-merge",
                     description="Merge multi-source hourly precipitation estimates "
                                 "toward gauge observations with a recurrent model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline from one config file")
    run.add_argument("--config", required=True, help="YAML run configuration")
    run.add_argument("--seed", type=int, help="override the global seed")
    run.add_argument("--threshold", type=float, help="override the event threshold (mm/h)")
    run.add_argument("--jobs", type=int, help="worker processes for station-fold training")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--overwrite", action="store_true",
                     help="allow writing into a non-empty output directory")
    run.add_argument("--strict", action="store_true",
                     help="fail if any metric is undefined")
    run.set_defaults(func=_cmd_run)

    chk = sub.add_parser("ingest-check", help="validate configured input files only")
    chk.add_argument("--config", required=True)
    chk.set_defaults(func=_cmd_ingest_check)

    tr = sub.add_parser("train", help="train a single station and fold")
    tr.add_argument("--config", required=True)
    tr.add_argument("--station", required=True, help="station id from the config")
    tr.add_argument("--fold", required=True, type=int, help="fold index (0-based)")
    tr.add_argument("--params-out", help="write trained parameters to this path")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("evaluate", help="recompute metric tables from an existing run")
    ev.add_argument("--config", required=True)
    ev.add_argument("--run-dir", required=True, help="directory produced by 'run'")
    ev.set_defaults(func=_cmd_evaluate)

    rd = sub.add_parser("render", help="render SVG plots from emitted CSV files")
    rd.add_argument("--run-dir", required=True)
    rd.add_argument("--out", help="plot directory (default: <run-dir>/plots)")
    rd.set_defaults(func=_cmd_render)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config).with_overrides(
        seed=args.seed, threshold=args.threshold, jobs=args.jobs,
        overwrite=args.overwrite or None, strict=args.strict or None,
        out_dir=args.out)
    manifest = run_pipeline(cfg)
    print(f"run complete: {len(manifest['stations'])} station(s), "
          f"{len(manifest['outputs'])} output file(s) in {cfg.out_dir}")
    return 0


def _cmd_ingest_check(args) -> int:
    cfg = load_config(args.config)
    summaries, problems = ingest_check(cfg)
    for s in summaries:
        print(f"ok {s['station']}/{s['product']}: {s['rows']} rows @ "
              f"{s['step_minutes']} min -> {s['hours']} hours, "
              f"{s['n_missing']} missing ({s['n_gaps']} gaps, longest {s['longest_gap']})")
    for path, message in problems:
        print(f"FAIL {path}: {message}", file=sys.stderr)
    return 2 if problems else 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    result = train_single(cfg, args.station, args.fold, params_path=args.params_out)
    history = result.history
    print(f"{args.station} fold {args.fold}: seed {result.seed}, "
          f"final train loss {history['train_loss'][-1]:.6f}, "
          f"final val loss {history['val_loss'][-1]:.6f}")
    if args.params_out:
        print(f"parameters written to {args.params_out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    evaluate_predictions(cfg, args.run_dir)
    print((Path(args.run_dir) / "metrics.txt").read_text(encoding="utf-8"), end="")
    return 0


def _cmd_render(args) -> int:
    written = render_run(args.run_dir, args.out)
    print(f"rendered {len(written)} plot(s)")
    return 0


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qpe-merge: config error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"qpe-merge: numeric failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"qpe-merge: data error: {exc}", file=sys.stderr)
        return 2
    except QpeMergeError as exc:
        print(f"qpe-merge: error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> int:
    return main()
