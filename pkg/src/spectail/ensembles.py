"""Seeded synthetic ensembles used as ground truth in tests and fixtures.

All generators draw from numpy's PCG64 (``np.random.default_rng``) with an
explicit 64-bit seed, so identical seeds reproduce identical matrices on any
platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import LayerMatrix
from .errors import ValidationError


@dataclass(frozen=True)
class SpikeSpec:
    """A planted low-rank perturbation: strength theta repeated multiplicity times."""

    strength: float
    multiplicity: int = 1

    def __post_init__(self):
        if self.strength <= 0:
            raise ValidationError(f"spike strength must be positive, got {self.strength}")
        if self.multiplicity < 1:
            raise ValidationError(f"spike multiplicity must be >= 1, got {self.multiplicity}")


def gen_iid_gaussian(
    m: int, n: int, sigma_sq: float, seed: int, name: str | None = None
) -> LayerMatrix:
    """m x n matrix of iid N(0, sigma_sq) entries."""
    if m < 1 or n < 1:
        raise ValidationError("matrix dimensions must be positive")
    if sigma_sq <= 0:
        raise ValidationError("sigma_sq must be positive")
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((m, n)) * np.sqrt(sigma_sq)
    return LayerMatrix(name=name or f"gaussian-{m}x{n}", values=values)


def gen_spiked(
    m: int,
    n: int,
    sigma_sq: float,
    spikes: list[SpikeSpec],
    seed: int,
    name: str | None = None,
) -> LayerMatrix:
    """Gaussian noise plus an additive low-rank mean shift.

    Each planted direction contributes sqrt(theta * m) * u v^T with u, v drawn
    from random orthonormal frames, so a spike of strength theta competes with
    a bulk of entry variance sigma_sq exactly at theta = sigma_sq * sqrt(n/m).
    """
    if m < 1 or n < 1:
        raise ValidationError("matrix dimensions must be positive")
    if sigma_sq <= 0:
        raise ValidationError("sigma_sq must be positive")
    strengths = [s.strength for s in spikes for _ in range(s.multiplicity)]
    total = len(strengths)
    if total > min(m, n):
        raise ValidationError(f"total spike multiplicity {total} exceeds min(m, n) = {min(m, n)}")

    rng = np.random.default_rng(seed)
    values = rng.standard_normal((m, n)) * np.sqrt(sigma_sq)
    if total:
        left = np.linalg.qr(rng.standard_normal((m, total)))[0]
        right = np.linalg.qr(rng.standard_normal((n, total)))[0]
        scale = np.sqrt(np.asarray(strengths) * m)
        values = values + (left * scale) @ right.T
    return LayerMatrix(name=name or f"spiked-{m}x{n}", values=values)


def gen_pareto_sample(count: int, alpha_density: float, x_min: float, seed: int) -> np.ndarray:
    """Inverse-CDF sample from the density proportional to x^(-alpha_density) on [x_min, inf).

    The survival function is (x/x_min)^(1 - alpha_density), so the survival
    exponent is alpha_density - 1.
    """
    if alpha_density <= 1:
        raise ValidationError(f"alpha_density must exceed 1, got {alpha_density}")
    if x_min <= 0:
        raise ValidationError(f"x_min must be positive, got {x_min}")
    if count < 1:
        raise ValidationError("count must be positive")
    uniform = np.random.default_rng(seed).random(count)
    return x_min * (1.0 - uniform) ** (-1.0 / (alpha_density - 1.0))


def gen_poisson_gap_spectrum(count: int, seed: int) -> np.ndarray:
    """Synthetic spectrum with uncorrelated levels: cumulative sums of iid Exp(1) gaps."""
    if count < 1:
        raise ValidationError("count must be positive")
    gaps = np.random.default_rng(seed).exponential(size=count)
    return np.cumsum(gaps)
