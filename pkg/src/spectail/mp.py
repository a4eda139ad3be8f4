"""Marchenko-Pastur bulk model: edges, density, CDF, variance estimation, KS fit.

For an m x n matrix with iid entries of variance sigma^2 and aspect ratio
gamma = n/m, the eigenvalues of (1/m) W^T W concentrate on
[sigma^2 (1 - sqrt(gamma))^2, sigma^2 (1 + sqrt(gamma))^2]; for gamma > 1 an
additional point mass of weight 1 - 1/gamma sits at zero (rank deficiency).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .bundle import LayerMatrix
from .errors import ValidationError
from .spectrum import EigenSpectrum

# Log-spaced search bracket for the KS fit, as multiples of the median
# positive eigenvalue.
SIGMA_BRACKET = (0.01, 100.0)
_SIGMA_GRID_POINTS = 81


@dataclass(frozen=True)
class MPParams:
    """Bulk-model parameters; the support edges are always recomputed."""

    sigma_sq: float
    gamma: float

    def __post_init__(self):
        if self.sigma_sq <= 0:
            raise ValidationError(f"sigma_sq must be positive, got {self.sigma_sq}")
        if self.gamma <= 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")

    @property
    def lambda_minus(self) -> float:
        """Lower edge of the eigenvalue support (0 when gamma >= 1)."""
        return mp_edges(self.sigma_sq, self.gamma)[0]

    @property
    def lambda_plus(self) -> float:
        """Upper edge of the eigenvalue support."""
        return mp_edges(self.sigma_sq, self.gamma)[1]

    def bulk_edges(self) -> tuple[float, float]:
        """Edges of the continuous bulk, without flooring the lower edge."""
        root = math.sqrt(self.gamma)
        return self.sigma_sq * (1 - root) ** 2, self.sigma_sq * (1 + root) ** 2

    @property
    def zero_mass(self) -> float:
        """Weight of the point mass at zero (gamma > 1 only)."""
        return max(0.0, 1.0 - 1.0 / self.gamma)


def mp_edges(sigma_sq: float, gamma: float) -> tuple[float, float]:
    """Support edges sigma^2 (1 +- sqrt(gamma))^2, lower edge floored at 0 for gamma > 1."""
    if sigma_sq <= 0 or gamma <= 0:
        raise ValidationError("mp_edges requires positive sigma_sq and gamma")
    root = math.sqrt(gamma)
    lower = sigma_sq * (1 - root) ** 2
    if gamma >= 1:
        lower = 0.0
    return lower, sigma_sq * (1 + root) ** 2


def bbp_threshold(sigma_sq: float, gamma: float) -> float:
    """Perturbation strength above which a spike escapes the bulk: sigma^2 sqrt(gamma)."""
    if sigma_sq <= 0 or gamma <= 0:
        raise ValidationError("bbp_threshold requires positive sigma_sq and gamma")
    return sigma_sq * math.sqrt(gamma)


def mp_pdf(x, params: MPParams):
    """Density of the continuous bulk (total mass min(1, 1/gamma))."""
    a, b = params.bulk_edges()
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    inside = (x > a) & (x < b)
    xi = x[inside]
    out[inside] = np.sqrt((b - xi) * (xi - a)) / (2 * np.pi * params.sigma_sq * params.gamma * xi)
    return out if out.ndim else float(out)


def _bulk_mass_below(x, params: MPParams):
    """Integral of the bulk density from the lower bulk edge up to x (closed form).

    Antiderivative of sqrt((b-t)(t-a)) / t:
        R + (a+b)/2 * arcsin((2t-a-b)/(b-a)) - sqrt(ab) * arcsin(((a+b)t - 2ab)/(t(b-a)))
    with R = sqrt((b-t)(t-a)).
    """
    a, b = params.bulk_edges()
    x = np.asarray(x, dtype=np.float64)
    t = np.clip(x, a, b)

    R = np.sqrt(np.maximum((b - t) * (t - a), 0.0))
    mid = ((a + b) / 2) * np.arcsin(np.clip((2 * t - a - b) / (b - a), -1.0, 1.0))
    if a > 0:
        arg = ((a + b) * t - 2 * a * b) / (t * (b - a))
        corner = -math.sqrt(a * b) * np.arcsin(np.clip(arg, -1.0, 1.0))
        at_a = -((a + b) / 2) * (np.pi / 2) + math.sqrt(a * b) * (np.pi / 2)
    else:
        # square case: the sqrt(ab) term vanishes
        corner = 0.0
        at_a = -((a + b) / 2) * (np.pi / 2)

    mass = (R + mid + corner - at_a) / (2 * np.pi * params.gamma * params.sigma_sq)
    bulk_total = min(1.0, 1.0 / params.gamma)
    # arcsin amplifies argument rounding near the edges; pin the endpoints exactly
    mass = np.where(x <= a, 0.0, np.where(x >= b, bulk_total, mass))
    return np.clip(mass, 0.0, bulk_total)


def mp_cdf(x, params: MPParams):
    """CDF of the full eigenvalue distribution, including the zero mass for gamma > 1.

    Exact closed form (no quadrature); monotone, 0 below the support and 1 at
    and above the upper edge.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x < 0.0, 0.0, params.zero_mass + _bulk_mass_below(x, params))
    return out if out.ndim else float(out)


def _bulk_conditional_cdf(x, params: MPParams):
    """CDF of the bulk conditioned on lambda > 0; equals mp_cdf when gamma <= 1."""
    bulk_total = min(1.0, 1.0 / params.gamma)
    return _bulk_mass_below(x, params) / bulk_total


def estimate_sigma_sq_from_init(layer: LayerMatrix) -> float:
    """Entry-variance estimate sum(init^2) / (m*n) from the untrained snapshot.

    This is the trace estimator: it equals the mean Gram eigenvalue of the
    init matrix and assumes nothing about the entry mean.
    """
    if layer.init_values is None:
        raise ValidationError(f"layer {layer.name!r} has no init snapshot")
    estimate = float(np.einsum("ij,ij->", layer.init_values, layer.init_values))
    estimate /= layer.init_values.size
    if estimate <= 0.0:
        raise ValidationError(f"layer {layer.name!r}: init snapshot is all zeros")
    return estimate


def _ks_statistic(sorted_positive: np.ndarray, params: MPParams) -> float:
    model = _bulk_conditional_cdf(sorted_positive, params)
    count = len(sorted_positive)
    grid = np.arange(1, count + 1) / count
    return float(max(np.max(np.abs(model - grid)), np.max(np.abs(model - grid + 1.0 / count))))


def fit_mp_sigma(spectrum: EigenSpectrum) -> tuple[MPParams, float]:
    """Best-fit entry variance by minimizing the KS distance to the bulk model.

    The empirical CDF of the strictly positive eigenvalues is compared with
    the bulk conditioned on lambda > 0 (structural zeros carry no information
    about sigma^2), with gamma fixed by the spectrum shape. The search runs a
    log-spaced grid over SIGMA_BRACKET times the median positive eigenvalue,
    then a bounded refinement around the grid minimum.

    Returns the fitted parameters and the minimized KS statistic in [0, 1].
    """
    positive = spectrum.positive
    if len(positive) < 10:
        raise ValidationError(f"MP fit needs >= 10 positive eigenvalues, got {len(positive)}")
    gamma = spectrum.gamma
    median = float(np.median(positive))

    def ks_of(sigma_sq: float) -> float:
        return _ks_statistic(positive, MPParams(sigma_sq=sigma_sq, gamma=gamma))

    grid = np.geomspace(SIGMA_BRACKET[0] * median, SIGMA_BRACKET[1] * median, _SIGMA_GRID_POINTS)
    coarse = np.array([ks_of(s) for s in grid])
    best = int(np.argmin(coarse))
    lo = grid[max(0, best - 1)]
    hi = grid[min(len(grid) - 1, best + 1)]
    result = minimize_scalar(ks_of, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})

    sigma_sq = float(result.x)
    ks = float(result.fun)
    if coarse[best] < ks:  # refinement should never lose to the grid
        sigma_sq, ks = float(grid[best]), float(coarse[best])
    return MPParams(sigma_sq=sigma_sq, gamma=gamma), ks
