"""Label corruption: replace a fixed fraction of labels with uniform draws."""

from __future__ import annotations

import numpy as np


def inject_label_noise(labels, noise_fraction: float, num_classes: int, seed: int) -> np.ndarray:
    """Replace round(noise_fraction * N) labels with uniform class draws.

    The corrupted index set is sampled without replacement and the new label
    is uniform over all classes, so it may coincide with the true one (at
    noise_fraction 1.0 roughly 1/num_classes of labels survive by chance).
    The result depends only on (labels, noise_fraction, num_classes, seed).
    """
    if not 0.0 <= noise_fraction <= 1.0:
        raise ValueError(f"noise_fraction {noise_fraction} outside [0, 1]")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    count = round(noise_fraction * len(labels))
    corrupted = labels.copy()
    if count:
        chosen = rng.choice(len(labels), size=count, replace=False)
        corrupted[chosen] = rng.integers(0, num_classes, size=count)
    return corrupted
