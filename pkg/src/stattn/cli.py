"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
``STATTN_SEED`` supplies the seed when neither ``--seed`` nor the config sets one.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import harness
from .config import ConfigError, load_run_config, read_config_file
from .errors import DataError, NumericError, ShapeError
from .model import TARGETS, VARIANTS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "STATTN_SEED"

log = logging.getLogger("stattn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stattn", description="Station-level bike traffic forecasting with attention.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="build a dataset artifact from raw CSVs")
    p.add_argument("--trips", required=True, help="glob matching monthly trip CSVs")
    p.add_argument("--weather", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--train-months", default="6,7,8")
    p.add_argument("--test-months", default="10")
    p.add_argument("--categories", default=None, help="POI category mapping CSV (default: bundled)")

    p = sub.add_parser("train", help="train one variant on one target")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", choices=sorted(VARIANTS), default=None)
    p.add_argument("--target", choices=TARGETS, default=None)
    p.add_argument("--data", default=None, help="artifact directory (overrides config)")
    p.add_argument("--out", default=None, help="run directory (overrides config)")
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("evaluate", help="score a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", default=None, help="output directory (default: beside the checkpoint)")

    p = sub.add_parser("plot-data", help="export one station's hourly series")
    p.add_argument("--pred", required=True, help="prediction CSV written by evaluate")
    p.add_argument("--station", type=int, required=True)
    p.add_argument("--from", dest="date_from", required=True, help="YYYY-MM-DD")
    p.add_argument("--to", dest="date_to", required=True, help="YYYY-MM-DD (inclusive)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("subset", help="equal-stride station subset by demand")
    p.add_argument("--data", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", default=None)
    return parser


def _months(text: str) -> tuple[int, ...]:
    try:
        months = tuple(int(m) for m in text.split(",") if m.strip())
    except ValueError:
        raise UsageError(f"bad month list {text!r}") from None
    if not months or any(not 1 <= m <= 12 for m in months):
        raise UsageError(f"bad month list {text!r}")
    return months


def _seed_fallback(args) -> int | None:
    if args.seed is not None:
        return args.seed
    if "seed" in read_config_file(args.config):
        return None
    env = os.environ.get(SEED_ENV)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _dispatch(args) -> None:
    if args.command == "ingest":
        digest = harness.run_ingest(
            args.trips, args.weather, args.pois, args.out,
            train_months=_months(args.train_months), test_months=_months(args.test_months),
            category_map_path=args.categories,
        )
        print(digest)
    elif args.command == "train":
        overrides = {"seed": _seed_fallback(args), "variant": args.variant, "target": args.target,
                     "data": args.data, "out": args.out, "epochs": args.epochs}
        cfg = load_run_config(args.config, overrides)
        result = harness.run_train(cfg)
        print(f"{result.out_dir} epochs={result.epochs} final_train_loss={result.final_train_loss!r} "
              f"best_epoch={result.best_epoch}")
    elif args.command == "evaluate":
        res = harness.run_evaluate(args.checkpoint, args.data, args.split, args.out)
        print(f"rmse={res.report.rmse!r} mae={res.report.mae!r} metrics={res.metrics_path} "
              f"predictions={res.predictions_path}")
    elif args.command == "plot-data":
        out, rows = harness.run_plot_data(args.pred, args.station, args.date_from, args.date_to, args.out)
        print(f"{out} rows={rows}")
    elif args.command == "subset":
        out, digest = harness.run_subset(args.data, args.count, args.out)
        print(f"{out} {digest}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, argument errors exit EXIT_USAGE
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _dispatch(args)
    except (UsageError, ConfigError) as exc:
        print(f"stattn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError, FileNotFoundError) as exc:
        print(f"stattn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"stattn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"stattn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
