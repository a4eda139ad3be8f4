"""Command-line surface: analyze, fit-mp, calibrate, detect, compare, synth.

Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 numerical
failure. Every error path prints a one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import analyze_bundle, predictor_row, report_document
from .bundle import WeightBundle, read_bundle, write_bundle
from .calibration import (
    aggregate_calibration_points,
    calibrate_detector,
    compare_predictors,
    detect_noise,
    load_model,
    render_comparison,
    save_model,
)
from .ensembles import (
    SpikeSpec,
    gen_iid_gaussian,
    gen_pareto_sample,
    gen_poisson_gap_spectrum,
    gen_spiked,
)
from .errors import NumericalError, ValidationError
from .mp import bbp_threshold, fit_mp_sigma
from .observables import HillConfig
from .spectrum import gram_spectrum

MANIFEST_COLUMNS = ("bundle_path", "noise_fraction", "test_accuracy", "seed")


def _emit_json(doc, target: str) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if target == "-":
        sys.stdout.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def _fmt(value, digits=4) -> str:
    if value is None:
        return "n/a"
    return f"{value:.{digits}f}"


def _print(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _read_manifest(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(
            MANIFEST_COLUMNS
        ):
            raise ValidationError(
                f"{path}: run manifest must have header {','.join(MANIFEST_COLUMNS)}"
            )
        rows = []
        for record in reader:
            rows.append(
                {
                    "bundle_path": (path.parent / record["bundle_path"]).resolve(),
                    "noise_fraction": float(record["noise_fraction"]),
                    "test_accuracy": float(record["test_accuracy"]),
                    "seed": int(record["seed"]),
                }
            )
    if not rows:
        raise ValidationError(f"{path}: run manifest has no rows")
    return rows


def _analyze_manifest(args, rows):
    cfg = HillConfig(threshold_quantile=args.hill_q)
    analyzed = []
    for row in rows:
        bundle = read_bundle(row["bundle_path"])
        analysis = analyze_bundle(
            bundle,
            cfg,
            use_init_sigma=not args.no_init_sigma,
            layer_override=args.layer,
            min_resolution=args.min_resolution,
        )
        analyzed.append((row, analysis))
    return analyzed


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    bundle = read_bundle(args.bundle)
    analysis = analyze_bundle(
        bundle,
        HillConfig(threshold_quantile=args.hill_q),
        use_init_sigma=not args.no_init_sigma,
        layer_override=args.layer,
        min_resolution=args.min_resolution,
    )
    doc = report_document(analysis)
    if args.json:
        _emit_json(doc, args.json)
    if args.json == "-" or args.quiet:
        return 0

    print(f"bundle {bundle.model_id}  ({len(bundle.layers)} layers)")
    header = (
        f"{'layer':<24}{'shape':>12}{'alpha':>9}{'eff.rank':>10}"
        f"{'outliers':>10}{'mp_ks':>8}{'<r>':>8}  sigma"
    )
    print(header)
    print("-" * len(header))
    for l in analysis.layers:
        obs = l.observables
        print(
            f"{l.name:<24}{f'{l.rows}x{l.cols}':>12}{_fmt(obs.tail_alpha, 3):>9}"
            f"{_fmt(obs.effective_rank_norm, 3):>10}{_fmt(obs.outlier_fraction, 4):>10}"
            f"{_fmt(obs.mp_ks, 4):>8}{_fmt(obs.spacing_ratio, 3):>8}  {obs.sigma_source}"
        )
    v = analysis.verdict
    print(
        f"bottleneck: {v.layer_name} (ratio {v.compression_ratio:.2f}, "
        f"resolution {v.resolution}) -- {v.reason}"
    )
    sweep = ", ".join(f"q={q:.2f}: {_fmt(a, 3)}" for q, a in analysis.hill_sweep)
    print(f"tail stability sweep: {sweep}")
    if analysis.sweep_spread is not None:
        print(f"sweep relative spread: {analysis.sweep_spread:.1%}")
    for warning in analysis.warnings:
        print(f"warning: {warning}")
    return 0


def cmd_fit_mp(args) -> int:
    bundle = read_bundle(args.bundle)
    layers = [bundle.layer(args.layer)] if args.layer else bundle.layers
    results = []
    for layer in layers:
        spectrum = gram_spectrum(layer, use_init=args.init)
        params, ks = fit_mp_sigma(spectrum)
        results.append(
            {
                "name": layer.name,
                "source": "init" if args.init else "trained",
                "sigma_sq": params.sigma_sq,
                "gamma": params.gamma,
                "lambda_minus": params.lambda_minus,
                "lambda_plus": params.lambda_plus,
                "ks": ks,
            }
        )
    doc = {"tool_version": __version__, "model_id": bundle.model_id, "fits": results}
    if args.json:
        _emit_json(doc, args.json)
    if args.json != "-":
        for r in results:
            _print(
                args,
                f"{r['name']:<24} sigma^2={r['sigma_sq']:.6f}  "
                f"edges=[{r['lambda_minus']:.6f}, {r['lambda_plus']:.6f}]  ks={r['ks']:.5f}",
            )
    return 0


def cmd_calibrate(args) -> int:
    rows = _read_manifest(Path(args.manifest))
    triples = []
    for row, analysis in _analyze_manifest(args, rows):
        alpha = analysis.layer(analysis.verdict.layer_name).observables.tail_alpha
        if alpha is None:
            raise ValidationError(
                f"bundle {row['bundle_path']}: no tail estimate on the bottleneck layer"
            )
        triples.append((row["noise_fraction"], alpha, row["test_accuracy"]))
    model = calibrate_detector(aggregate_calibration_points(triples))
    save_model(model, args.out)
    _print(
        args,
        f"calibrated on {len(model.points)} noise levels "
        f"({len(triples)} runs); loo_r2={model.loo_r2:.4f} -> {args.out}",
    )
    for warning in model.warnings:
        _print(args, f"warning: {warning}")
    return 0


def cmd_detect(args) -> int:
    model = load_model(args.model)
    bundle = read_bundle(args.bundle)
    analysis = analyze_bundle(
        bundle,
        HillConfig(threshold_quantile=args.hill_q),
        use_init_sigma=not args.no_init_sigma,
        layer_override=args.layer,
        min_resolution=args.min_resolution,
    )
    alpha = analysis.layer(analysis.verdict.layer_name).observables.tail_alpha
    if alpha is None:
        raise ValidationError("no tail estimate on the bottleneck layer")
    result = detect_noise(model, alpha)
    doc = result.to_dict()
    doc["alpha"] = alpha
    doc["layer"] = analysis.verdict.layer_name
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    if args.json and args.json != "-":  # "-" would duplicate the stdout result
        _emit_json(doc, args.json)
    return 0


def cmd_compare(args) -> int:
    rows = _read_manifest(Path(args.manifest))
    records = [
        predictor_row(analysis, row["noise_fraction"], row["test_accuracy"], row["seed"])
        for row, analysis in _analyze_manifest(args, rows)
    ]
    warnings = []
    levels = {r.noise_fraction for r in records}
    average = len(levels) >= 3
    if not average:
        warnings.append(
            f"only {len(levels)} distinct noise level(s); comparing per run instead of "
            f"per seed-averaged level"
        )
    table = compare_predictors(records, average_by_level=average)
    doc = {"tool_version": __version__, "measures": table, "warnings": warnings}
    if args.json:
        _emit_json(doc, args.json)
    if args.json != "-":
        _print(args, render_comparison(table))
        for warning in warnings:
            _print(args, f"warning: {warning}")
    return 0


def _write_sample(values: np.ndarray, path: Path) -> None:
    path.write_text("".join(f"{v!r}\n" for v in values.tolist()), encoding="utf-8")


def cmd_synth(args) -> int:
    if args.seed is None:
        raise ValidationError("synth requires an explicit --seed")
    out = Path(args.out)
    if args.kind == "gaussian":
        layer = gen_iid_gaussian(args.m, args.n, args.sigma2, args.seed)
        bundle = WeightBundle(
            model_id=f"synth-gaussian-{args.m}x{args.n}-seed{args.seed}",
            layers=[layer],
            metadata={"generator": "gaussian", "sigma_sq": repr(args.sigma2), "seed": str(args.seed)},
        )
        write_bundle(bundle, out)
    elif args.kind == "spiked":
        gamma = args.n / args.m
        theta = args.theta if args.theta is not None else args.theta_mult * bbp_threshold(
            args.sigma2, gamma
        )
        layer = gen_spiked(
            args.m, args.n, args.sigma2, [SpikeSpec(theta, args.spikes)], args.seed
        )
        bundle = WeightBundle(
            model_id=f"synth-spiked-{args.m}x{args.n}-seed{args.seed}",
            layers=[layer],
            metadata={
                "generator": "spiked",
                "sigma_sq": repr(args.sigma2),
                "theta": repr(theta),
                "spikes": str(args.spikes),
                "seed": str(args.seed),
            },
        )
        write_bundle(bundle, out)
    elif args.kind == "pareto":
        _write_sample(gen_pareto_sample(args.count, args.alpha, args.xmin, args.seed), out)
    elif args.kind == "poisson-gaps":
        _write_sample(gen_poisson_gap_spectrum(args.count, args.seed), out)
    else:  # unreachable: argparse restricts choices
        raise ValidationError(f"unknown synth kind {args.kind!r}")
    _print(args, f"wrote {args.kind} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", metavar="PATH", help="write a JSON report to PATH ('-' = stdout)")
    common.add_argument("--quiet", action="store_true", help="suppress the human-readable summary")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (required where used)")

    analysis_flags = argparse.ArgumentParser(add_help=False)
    analysis_flags.add_argument("--layer", help="pin the bottleneck to a named layer")
    analysis_flags.add_argument(
        "--hill-q", type=float, default=0.90, help="tail threshold quantile (default 0.90)"
    )
    analysis_flags.add_argument(
        "--no-init-sigma",
        action="store_true",
        help="ignore init snapshots; always use the fitted variance for the outlier edge",
    )
    analysis_flags.add_argument(
        "--min-resolution",
        type=int,
        default=50,
        help="smallest usable min(rows, cols) for bottleneck eligibility (default 50)",
    )

    parser = argparse.ArgumentParser(
        prog="spectail",
        description="Spectral data-quality diagnostics for neural-network weight bundles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common, analysis_flags], help="per-layer observables")
    p.add_argument("bundle", help="bundle directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit-mp", parents=[common], help="best-fit bulk model per layer")
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--layer", help="fit a single named layer")
    p.add_argument("--init", action="store_true", help="fit the init snapshots instead")
    p.set_defaults(func=cmd_fit_mp)

    p = sub.add_parser(
        "calibrate", parents=[common, analysis_flags], help="fit the noise detector"
    )
    p.add_argument("manifest", help="runs.csv (bundle_path,noise_fraction,test_accuracy,seed)")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser(
        "detect", parents=[common, analysis_flags], help="estimate noise for one bundle"
    )
    p.add_argument("--model", required=True, help="calibration model JSON")
    p.add_argument("bundle", help="bundle directory")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser(
        "compare", parents=[common, analysis_flags], help="rank predictors of test accuracy"
    )
    p.add_argument("manifest", help="runs.csv (bundle_path,noise_fraction,test_accuracy,seed)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic fixtures")
    p.add_argument("kind", choices=["gaussian", "spiked", "pareto", "poisson-gaps"])
    p.add_argument("--m", type=int, default=512, help="rows")
    p.add_argument("--n", type=int, default=1024, help="cols")
    p.add_argument("--sigma2", type=float, default=1.0, help="entry variance")
    p.add_argument("--theta", type=float, default=None, help="spike strength")
    p.add_argument(
        "--theta-mult",
        type=float,
        default=4.0,
        help="spike strength as a multiple of the escape threshold (if --theta absent)",
    )
    p.add_argument("--spikes", type=int, default=1, help="number of planted directions")
    p.add_argument("--alpha", type=float, default=2.1, help="tail density exponent (pareto)")
    p.add_argument("--xmin", type=float, default=1.0, help="tail support start (pareto)")
    p.add_argument("--count", type=int, default=5000, help="sample size (pareto/poisson-gaps)")
    p.add_argument("--out", required=True, help="output bundle directory or sample file")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(exc, 2)
    except NumericalError as exc:
        return _fail(exc, 3)
    except OSError as exc:
        return _fail(exc, 1)


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(
        json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
