"""Command line: train a label-noise gradient (or a small clean-label sweep)."""

from __future__ import annotations

import argparse
import sys

from .data import DATASETS
from .train import DEFAULT_WIDTHS, TrainSpec, run_hyperparameter_sweep, run_noise_gradient


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fixture-trainer",
        description="Train small MLPs under label noise and export weight bundles.",
    )
    parser.add_argument(
        "--levels",
        default="0,0.25,0.5,0.75,1.0",
        help="comma-separated noise fractions (default 0,0.25,0.5,0.75,1.0)",
    )
    parser.add_argument("--seeds", type=int, default=3, help="seeds per noise level")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--dataset", choices=DATASETS, default="small-digits")
    parser.add_argument(
        "--widths",
        default=",".join(str(w) for w in DEFAULT_WIDTHS),
        help="layer widths, input to classes",
    )
    parser.add_argument("--epochs", type=int, default=600)
    parser.add_argument("--lr", type=float, default=0.02)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--weight-decay", type=float, default=0.0)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument(
        "--train-size",
        type=int,
        default=360,
        help="training-subset size (0 = full canonical split; default 360)",
    )
    parser.add_argument("--data-dir", default=None, help="IDX file directory (mnist-subset)")
    parser.add_argument(
        "--mode",
        choices=["gradient", "sweep"],
        default="gradient",
        help="gradient: noise levels x seeds; sweep: reduced 2x2x2 config grid at clean labels",
    )
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        levels = [float(x) for x in args.levels.split(",") if x.strip() != ""]
        widths = [int(x) for x in args.widths.split(",")]
        template = TrainSpec(
            dataset=args.dataset,
            widths=widths,
            epochs=args.epochs,
            learning_rate=args.lr,
            momentum=args.momentum,
            weight_decay=args.weight_decay,
            batch_size=args.batch_size,
            train_size=args.train_size or None,
            data_dir=args.data_dir,
        )
        log = None if args.quiet else lambda message: print(message, flush=True)
        if args.mode == "sweep":
            manifest = run_hyperparameter_sweep(template, args.out, log)
        else:
            if not levels:
                raise ValueError("--levels must name at least one noise fraction")
            manifest = run_noise_gradient(levels, args.seeds, template, args.out, log)
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    if not args.quiet:
        print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
