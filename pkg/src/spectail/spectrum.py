"""Eigenvalue spectrum of the normalized Gram matrix S = (1/m) W^T W.

The spectrum is computed from the singular values of W (lambda_i = s_i^2 / m)
rather than by forming W^T W, which keeps small eigenvalues accurate. For a
wide matrix (n > m) the Gram matrix is rank-deficient and the spectrum is
padded with exactly n - m structural zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import LayerMatrix
from .errors import NumericalError, ValidationError

# Eigenvalues in [-EPS_SYM_REL * max(lambda), 0) are clamped to zero; anything
# more negative means the solver failed on an exactly-PSD problem.
EPS_SYM_REL = 1e-10

# Allowed relative drift of sum(lambda) from the exact trace (1/m) * sum(W^2).
TRACE_RTOL = 1e-10


@dataclass(frozen=True)
class EigenSpectrum:
    """Sorted Gram-matrix eigenvalues with their source shape."""

    eigenvalues: np.ndarray  # ascending, length n, all >= 0
    source_rows: int
    source_cols: int

    @property
    def gamma(self) -> float:
        """Aspect ratio n/m of the source matrix."""
        return self.source_cols / self.source_rows

    @property
    def zero_count(self) -> int:
        """Structural zeros forced by rank: max(0, n - m)."""
        return max(0, self.source_cols - self.source_rows)

    @property
    def positive(self) -> np.ndarray:
        """The strictly positive eigenvalues (ascending)."""
        return self.eigenvalues[self.eigenvalues > 0.0]

    @classmethod
    def from_values(cls, values, source_rows: int | None = None) -> "EigenSpectrum":
        """Wrap a raw positive sample as a square-case spectrum.

        Used for synthetic spectra (tail fixtures, gap fixtures) that have no
        source matrix; gamma is 1 by convention.
        """
        arr = np.sort(np.asarray(values, dtype=np.float64))
        arr = _clamp_negatives(arr)
        n = len(arr)
        return cls(eigenvalues=arr, source_rows=source_rows or n, source_cols=n)


def _clamp_negatives(eigenvalues: np.ndarray) -> np.ndarray:
    if len(eigenvalues) == 0:
        return eigenvalues
    tol = EPS_SYM_REL * max(eigenvalues.max(), 0.0)
    low = eigenvalues.min()
    if low < -tol:
        raise NumericalError(f"eigenvalue {low} below PSD tolerance -{tol}")
    return np.maximum(eigenvalues, 0.0)


def gram_spectrum(layer: LayerMatrix, use_init: bool = False) -> EigenSpectrum:
    """Eigenvalues of (1/m) W^T W for a layer, sorted ascending.

    With ``use_init`` the initialization snapshot is decomposed instead of the
    trained values. Exactly ``max(0, n - m)`` zeros are appended for wide
    matrices, and the trace identity sum(lambda) == (1/m) * sum(W^2) is
    verified on every call.
    """
    if use_init:
        if layer.init_values is None:
            raise ValidationError(f"layer {layer.name!r} has no init snapshot")
        W = layer.init_values
    else:
        W = layer.values

    m, n = W.shape
    try:
        singular = np.linalg.svd(W, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for layer {layer.name!r}") from exc

    eigenvalues = np.sort(singular.astype(np.float64) ** 2 / m)
    if n > m:
        eigenvalues = np.concatenate([np.zeros(n - m), eigenvalues])

    trace = float(np.einsum("ij,ij->", W, W)) / m
    drift = abs(float(eigenvalues.sum()) - trace)
    if drift > TRACE_RTOL * max(trace, 1e-300):
        raise NumericalError(
            f"trace identity violated for layer {layer.name!r}: "
            f"sum(lambda)={eigenvalues.sum()!r} vs trace={trace!r}"
        )

    return EigenSpectrum(eigenvalues=eigenvalues, source_rows=m, source_cols=n)
