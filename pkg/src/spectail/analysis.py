"""Bundle-level driver: all observables per layer, bottleneck verdict, report JSON.

The variance used for outlier counting comes from the init snapshot when one
is present (the untrained matrix is the null model); otherwise the fit on the
trained spectrum is used and the report says so.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bottleneck import (
    DEFAULT_MIN_RESOLUTION,
    BottleneckVerdict,
    override_verdict,
    select_bottleneck,
)
from .bundle import WeightBundle
from .calibration import PredictorRow
from .errors import NumericalError, ValidationError
from .mp import MPParams, estimate_sigma_sq_from_init, fit_mp_sigma
from .observables import (
    DEFAULT_SWEEP_QUANTILES,
    STABLE_TAIL_MIN_POSITIVE,
    HillConfig,
    ObservableSet,
    effective_rank,
    hill_stability_sweep,
    hill_tail,
    outlier_fraction,
    spacing_ratio,
    sweep_relative_spread,
)
from .spectrum import EigenSpectrum, gram_spectrum


@dataclass
class LayerAnalysis:
    name: str
    rows: int
    cols: int
    depth_index: int
    observables: ObservableSet
    mp_params: MPParams | None     # parameters used for outlier counting
    fitted_sigma_sq: float | None  # best-fit variance on the trained spectrum
    spectrum: EigenSpectrum


@dataclass
class BundleAnalysis:
    bundle: WeightBundle
    layers: list[LayerAnalysis]
    verdict: BottleneckVerdict
    hill_sweep: list[tuple[float, float | None]]
    sweep_spread: float | None
    norms: "NormsView"
    warnings: list[str] = field(default_factory=list)

    def layer(self, name: str) -> LayerAnalysis:
        for l in self.layers:
            if l.name == name:
                return l
        raise ValidationError(f"no analysis for layer {name!r}")


@dataclass
class NormsView:
    global_l2: float
    frobenius_sum: float
    spectral_max: float
    spectral_product: float


def analyze_layer(
    layer, hill_cfg: HillConfig, use_init_sigma: bool = True
) -> LayerAnalysis:
    spectrum = gram_spectrum(layer)
    warnings: list[str] = []

    fitted_sigma_sq = None
    mp_ks = None
    try:
        fitted_params, mp_ks = fit_mp_sigma(spectrum)
        fitted_sigma_sq = fitted_params.sigma_sq
    except ValidationError as exc:
        fitted_params = None
        warnings.append(f"MP fit skipped: {exc}")

    if use_init_sigma and layer.init_values is not None:
        sigma_source = "init"
        params = MPParams(sigma_sq=estimate_sigma_sq_from_init(layer), gamma=spectrum.gamma)
    else:
        sigma_source = "fitted"
        params = fitted_params
        if use_init_sigma:
            warnings.append("no init snapshot; outlier edge uses the fitted variance")

    tail_alpha = tail_raw = None
    try:
        estimate = hill_tail(spectrum, hill_cfg)
        tail_alpha, tail_raw = estimate.alpha, estimate.raw
    except (ValidationError, NumericalError) as exc:
        warnings.append(f"tail fit skipped: {exc}")

    ratio = None
    try:
        ratio = spacing_ratio(spectrum)
    except ValidationError as exc:
        warnings.append(f"spacing ratio skipped: {exc}")

    positive_count = len(spectrum.positive)
    if positive_count < STABLE_TAIL_MIN_POSITIVE:
        warnings.append(
            f"only {positive_count} positive eigenvalues; tail estimates are unstable "
            f"below {STABLE_TAIL_MIN_POSITIVE}"
        )

    observables = ObservableSet(
        tail_alpha=tail_alpha,
        tail_alpha_raw=tail_raw,
        effective_rank_norm=effective_rank(spectrum),
        outlier_fraction=outlier_fraction(spectrum, params) if params else None,
        mp_ks=mp_ks,
        spacing_ratio=ratio,
        frobenius_norm=float(np.linalg.norm(layer.values)),
        spectral_norm=float(np.sqrt(spectrum.eigenvalues[-1] * spectrum.source_rows)),
        positive_count=positive_count,
        sigma_source=sigma_source,
        warnings=warnings,
    )
    return LayerAnalysis(
        name=layer.name,
        rows=layer.rows,
        cols=layer.cols,
        depth_index=layer.depth_index,
        observables=observables,
        mp_params=params,
        fitted_sigma_sq=fitted_sigma_sq,
        spectrum=spectrum,
    )


def analyze_bundle(
    bundle: WeightBundle,
    hill_cfg: HillConfig = HillConfig(),
    use_init_sigma: bool = True,
    layer_override: str | None = None,
    min_resolution: int = DEFAULT_MIN_RESOLUTION,
    sweep_quantiles=DEFAULT_SWEEP_QUANTILES,
) -> BundleAnalysis:
    """Analyze every layer and run the threshold-stability sweep on the bottleneck."""
    bundle.validate()
    if not bundle.layers:
        raise ValidationError(f"bundle {bundle.model_id!r} has no layers")

    layers = [analyze_layer(l, hill_cfg, use_init_sigma) for l in bundle.layers]

    if layer_override is not None:
        verdict = override_verdict(bundle, layer_override, min_resolution)
    else:
        verdict = select_bottleneck(bundle, min_resolution)

    chosen = next(l for l in layers if l.name == verdict.layer_name)
    sweep = hill_stability_sweep(chosen.spectrum, sweep_quantiles, hill_cfg.min_tail_count)

    # aggregates from the per-layer results; spectral norms come for free from
    # the spectra already computed above
    frobs = np.array([l.observables.frobenius_norm for l in layers])
    tops = np.array([l.observables.spectral_norm for l in layers])
    product = 0.0 if np.any(tops == 0.0) else float(np.exp(np.sum(np.log(tops))))

    warnings = [f"{l.name}: {w}" for l in layers for w in l.observables.warnings]
    return BundleAnalysis(
        bundle=bundle,
        layers=layers,
        verdict=verdict,
        hill_sweep=sweep,
        sweep_spread=sweep_relative_spread(sweep),
        norms=NormsView(
            global_l2=float(np.sqrt(np.sum(frobs**2))),
            frobenius_sum=float(frobs.sum()),
            spectral_max=float(tops.max()),
            spectral_product=product,
        ),
        warnings=warnings,
    )


def report_document(analysis: BundleAnalysis) -> dict:
    """Deterministically ordered report dict, ready for JSON serialization."""
    layers = []
    for l in analysis.layers:
        obs = l.observables
        layers.append(
            {
                "name": l.name,
                "rows": l.rows,
                "cols": l.cols,
                "depth_index": l.depth_index,
                "observables": {
                    "tail_alpha": obs.tail_alpha,
                    "tail_alpha_raw": obs.tail_alpha_raw,
                    "effective_rank_norm": obs.effective_rank_norm,
                    "outlier_fraction": obs.outlier_fraction,
                    "mp_ks": obs.mp_ks,
                    "spacing_ratio": obs.spacing_ratio,
                    "frobenius_norm": obs.frobenius_norm,
                    "spectral_norm": obs.spectral_norm,
                    "positive_count": obs.positive_count,
                    "sigma_source": obs.sigma_source,
                },
                "mp": {
                    "sigma_sq": l.mp_params.sigma_sq if l.mp_params else None,
                    "gamma": l.spectrum.gamma,
                    "lambda_minus": l.mp_params.lambda_minus if l.mp_params else None,
                    "lambda_plus": l.mp_params.lambda_plus if l.mp_params else None,
                    "fitted_sigma_sq": l.fitted_sigma_sq,
                },
            }
        )
    return {
        "tool_version": __version__,
        "model_id": analysis.bundle.model_id,
        "metadata": dict(analysis.bundle.metadata),
        "layers": layers,
        "bottleneck": {
            "layer_name": analysis.verdict.layer_name,
            "compression_ratio": analysis.verdict.compression_ratio,
            "resolution": analysis.verdict.resolution,
            "eligible_layers": [
                {"name": n, "compression_ratio": r, "resolution": res}
                for n, r, res in analysis.verdict.eligible_layers
            ],
            "reason": analysis.verdict.reason,
            "hill_sweep": [{"q": q, "alpha": a} for q, a in analysis.hill_sweep],
            "sweep_relative_spread": analysis.sweep_spread,
        },
        "norms": {
            "global_l2": analysis.norms.global_l2,
            "frobenius_sum": analysis.norms.frobenius_sum,
            "spectral_max": analysis.norms.spectral_max,
            "spectral_product": analysis.norms.spectral_product,
        },
        "warnings": list(analysis.warnings),
    }


def predictor_row(
    analysis: BundleAnalysis, noise_fraction: float, test_accuracy: float, seed: int
) -> PredictorRow:
    """Flatten one analyzed run into a comparison-table row."""
    chosen = analysis.layer(analysis.verdict.layer_name)
    return PredictorRow(
        noise_fraction=noise_fraction,
        test_accuracy=test_accuracy,
        seed=seed,
        tail_alpha=chosen.observables.tail_alpha,
        effective_rank=chosen.observables.effective_rank_norm,
        layer_frobenius={l.name: l.observables.frobenius_norm for l in analysis.layers},
        layer_depth={l.name: l.depth_index for l in analysis.layers},
        global_l2=analysis.norms.global_l2,
        frobenius_sum=analysis.norms.frobenius_sum,
        spectral_max=analysis.norms.spectral_max,
        spectral_product=analysis.norms.spectral_product,
    )
