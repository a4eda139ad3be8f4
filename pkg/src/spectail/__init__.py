"""Spectral data-quality diagnostics for neural-network weight matrices.

The library turns weight matrices into Gram-spectrum observables (tail index,
effective rank, bulk-model outliers, gap statistics), picks the layer where
the signal concentrates, and calibrates a linear detector that estimates the
label-noise fraction of the training data from the tail index alone.
"""

__version__ = "0.1.0"

from .bottleneck import BottleneckVerdict, select_bottleneck
from .bundle import LayerMatrix, WeightBundle, read_bundle, write_bundle
from .calibration import (
    CalibrationModel,
    CalibrationPoint,
    DetectionResult,
    best_layer_frobenius,
    calibrate_detector,
    compare_predictors,
    detect_noise,
    fit_linear,
    load_model,
    loo_r2,
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
from .mp import (
    MPParams,
    bbp_threshold,
    estimate_sigma_sq_from_init,
    fit_mp_sigma,
    mp_cdf,
    mp_edges,
    mp_pdf,
)
from .observables import (
    HillConfig,
    ObservableSet,
    effective_rank,
    hill_alpha,
    hill_stability_sweep,
    norm_baselines,
    outlier_fraction,
    spacing_ratio,
)
from .spectrum import EigenSpectrum, gram_spectrum

__all__ = [
    "__version__",
    "BottleneckVerdict",
    "CalibrationModel",
    "CalibrationPoint",
    "DetectionResult",
    "EigenSpectrum",
    "HillConfig",
    "LayerMatrix",
    "MPParams",
    "NumericalError",
    "ObservableSet",
    "SpikeSpec",
    "ValidationError",
    "WeightBundle",
    "best_layer_frobenius",
    "bbp_threshold",
    "calibrate_detector",
    "compare_predictors",
    "detect_noise",
    "effective_rank",
    "estimate_sigma_sq_from_init",
    "fit_linear",
    "fit_mp_sigma",
    "gen_iid_gaussian",
    "gen_pareto_sample",
    "gen_poisson_gap_spectrum",
    "gen_spiked",
    "gram_spectrum",
    "hill_alpha",
    "hill_stability_sweep",
    "load_model",
    "loo_r2",
    "mp_cdf",
    "mp_edges",
    "mp_pdf",
    "norm_baselines",
    "outlier_fraction",
    "read_bundle",
    "save_model",
    "select_bottleneck",
    "spacing_ratio",
    "write_bundle",
]
