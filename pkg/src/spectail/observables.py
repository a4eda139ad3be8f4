"""Per-layer spectral observables and the norm-based baseline measures.

Structural zeros (from wide matrices) are excluded where the observable is
undefined at zero (tail fit, gap statistics) but kept in the denominators of
the normalized measures (effective rank, outlier fraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bundle import WeightBundle
from .errors import NumericalError, ValidationError
from .mp import MPParams
from .spectrum import EigenSpectrum

# Threshold-quantile grid used by the stability report.
DEFAULT_SWEEP_QUANTILES = (0.70, 0.75, 0.80, 0.85, 0.90, 0.95)

# Below this many positive eigenvalues, tail estimates are flagged as unstable.
STABLE_TAIL_MIN_POSITIVE = 50


@dataclass(frozen=True)
class HillConfig:
    """Tail-fit configuration: quantile threshold and minimum tail size."""

    threshold_quantile: float = 0.90
    min_tail_count: int = 5

    def __post_init__(self):
        if not 0.0 < self.threshold_quantile < 1.0:
            raise ValidationError(
                f"threshold_quantile must lie in (0, 1), got {self.threshold_quantile}"
            )
        if self.min_tail_count < 1:
            raise ValidationError("min_tail_count must be >= 1")


@dataclass(frozen=True)
class HillEstimate:
    """Raw and density-convention tail exponents for one threshold choice."""

    raw: float          # inverse mean log-excess over the threshold
    alpha: float        # raw + 1, the density-exponent convention
    tail_count: int
    threshold: float


@dataclass
class ObservableSet:
    """All spectral and norm observables for one layer."""

    tail_alpha: float | None
    tail_alpha_raw: float | None
    effective_rank_norm: float
    outlier_fraction: float | None
    mp_ks: float | None
    spacing_ratio: float | None
    frobenius_norm: float
    spectral_norm: float
    positive_count: int
    sigma_source: str  # "init" or "fitted"
    warnings: list[str] = field(default_factory=list)


def hill_tail(spectrum: EigenSpectrum, cfg: HillConfig = HillConfig()) -> HillEstimate:
    """Hill tail fit over the eigenvalues above the configured quantile.

    With positive order statistics l_(1) <= ... <= l_(P), tail size
    k = ceil((1 - q) * P) and threshold u = l_(P-k), the raw exponent is

        h = 1 / mean(log(l_(i) / u), i = P-k+1 .. P)

    and alpha = h + 1. Lower alpha means a heavier tail.
    """
    positive = spectrum.positive
    count = len(positive)
    k = math.ceil((1.0 - cfg.threshold_quantile) * count)
    if k < cfg.min_tail_count:
        raise ValidationError(
            f"tail has {k} eigenvalues at q={cfg.threshold_quantile}, "
            f"need >= {cfg.min_tail_count}"
        )
    if k >= count:
        raise ValidationError("tail covers the whole spectrum; no threshold eigenvalue left")
    threshold = float(positive[count - k - 1])
    if threshold <= 0.0:
        raise ValidationError("threshold eigenvalue is zero")
    mean_log = float(np.mean(np.log(positive[count - k:] / threshold)))
    if mean_log <= 0.0:
        raise NumericalError("degenerate tail: eigenvalues above the threshold are all equal")
    raw = 1.0 / mean_log
    return HillEstimate(raw=raw, alpha=raw + 1.0, tail_count=k, threshold=threshold)


def hill_alpha(spectrum: EigenSpectrum, cfg: HillConfig = HillConfig()) -> float:
    """Tail index alpha (density convention) of the spectrum's upper tail."""
    return hill_tail(spectrum, cfg).alpha


def hill_stability_sweep(
    spectrum: EigenSpectrum,
    q_grid=DEFAULT_SWEEP_QUANTILES,
    min_tail_count: int = 5,
) -> list[tuple[float, float | None]]:
    """alpha per threshold quantile; entries where the fit fails carry None."""
    sweep: list[tuple[float, float | None]] = []
    for q in q_grid:
        try:
            alpha = hill_alpha(spectrum, HillConfig(q, min_tail_count))
        except (ValidationError, NumericalError):
            alpha = None
        sweep.append((float(q), alpha))
    return sweep


def sweep_relative_spread(sweep: list[tuple[float, float | None]]) -> float | None:
    """(max - min) / min over the successful sweep points."""
    alphas = [a for _, a in sweep if a is not None]
    if not alphas:
        return None
    return (max(alphas) - min(alphas)) / min(alphas)


def effective_rank(spectrum: EigenSpectrum) -> float:
    """exp(entropy of the normalized spectrum) / n, in (0, 1].

    Zeros contribute nothing to the entropy but stay in the denominator n, so
    a flat positive spectrum scores exactly 1 and a rank-1 spectrum 1/n.
    """
    total = float(spectrum.eigenvalues.sum())
    if total <= 0.0:
        raise ValidationError("effective rank undefined for an all-zero spectrum")
    p = spectrum.eigenvalues / total
    p = p[p > 0]
    entropy = -float(np.sum(p * np.log(p)))
    return math.exp(entropy) / len(spectrum.eigenvalues)


def outlier_fraction(spectrum: EigenSpectrum, params: MPParams) -> float:
    """Fraction of all n eigenvalues above the bulk's upper edge."""
    if abs(params.gamma - spectrum.gamma) > 1e-12:
        raise ValidationError(
            f"aspect-ratio mismatch: params gamma={params.gamma}, spectrum gamma={spectrum.gamma}"
        )
    return float(np.count_nonzero(spectrum.eigenvalues > params.lambda_plus)) / len(
        spectrum.eigenvalues
    )


def spacing_ratio(spectrum: EigenSpectrum) -> float:
    """Mean consecutive-gap ratio <r> = mean(min(s_i, s_i+1) / max(s_i, s_i+1)).

    Computed over the distinct positive eigenvalues (exact-equality dedup);
    no unfolding is needed because the ratio cancels the local level density.
    Approximately 0.386 for uncorrelated spectra and 0.531 for GOE-class ones.
    """
    distinct = np.unique(spectrum.positive)
    if len(distinct) < 3:
        raise ValidationError(
            f"spacing ratio needs >= 3 distinct positive eigenvalues, got {len(distinct)}"
        )
    gaps = np.diff(distinct)
    ratios = np.minimum(gaps[:-1], gaps[1:]) / np.maximum(gaps[:-1], gaps[1:])
    return float(ratios.mean())


@dataclass(frozen=True)
class LayerNorms:
    name: str
    depth_index: int
    frobenius: float
    spectral: float


@dataclass(frozen=True)
class NormSummary:
    """Norm-based baseline measures over a whole bundle."""

    per_layer: tuple[LayerNorms, ...]
    global_l2: float          # sqrt(sum_l ||W_l||_F^2)
    frobenius_sum: float      # sum_l ||W_l||_F
    spectral_max: float       # max_l sigma_1(W_l)
    spectral_product: float   # prod_l sigma_1(W_l), accumulated in log space


def norm_baselines(bundle: WeightBundle) -> NormSummary:
    """Frobenius and spectral norms per layer plus the global aggregates."""
    if not bundle.layers:
        raise ValidationError("norm baselines need a non-empty bundle")
    per_layer = []
    for layer in bundle.layers:
        frob = float(np.linalg.norm(layer.values))
        top = float(np.linalg.svd(layer.values, compute_uv=False)[0])
        per_layer.append(
            LayerNorms(
                name=layer.name, depth_index=layer.depth_index, frobenius=frob, spectral=top
            )
        )
    frobs = np.array([l.frobenius for l in per_layer])
    tops = np.array([l.spectral for l in per_layer])
    if np.any(tops == 0.0):
        product = 0.0
    else:
        product = float(np.exp(np.sum(np.log(tops))))
    return NormSummary(
        per_layer=tuple(per_layer),
        global_l2=float(np.sqrt(np.sum(frobs**2))),
        frobenius_sum=float(frobs.sum()),
        spectral_max=float(tops.max()),
        spectral_product=product,
    )
