"""Training harness that produces real weight bundles under controlled label noise.

Small MLPs are trained on the 8x8 digits dataset (or a local MNIST subset)
with a chosen fraction of training labels replaced by uniformly random ones,
then exported with their initialization snapshots in the weight-bundle
directory format that the spectral analyzer reads.
"""

__version__ = "0.1.0"

from .noise import inject_label_noise
from .train import TrainSpec, run_noise_gradient, train_and_export

__all__ = ["TrainSpec", "inject_label_noise", "run_noise_gradient", "train_and_export"]
