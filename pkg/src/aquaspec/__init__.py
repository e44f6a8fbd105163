"""aquaspec: UV-Vis absorbance soft sensor for water quality parameters.

Estimates TOC, calcium, sodium, magnesium, conductivity, and chlorides from
UV-Vis spectra through a standardize -> PCA -> multitarget MLP pipeline,
evaluates it with nested cross-validation and random search, and explains
predictions per wavelength with SHAP values. A Beer-Lambert synthetic
generator provides verifiable ground truth.
"""

__version__ = "0.1.0"

from .explain import ShapExplanation, explain_pipeline, kernel_shap, shap_summary
from .metrics import mape, r2, rmse
from .mlp import MlpConfig, MlpModel, TrainHistory
from .modelsel import (
    CvReport,
    HyperRanges,
    MetricSummary,
    TrialConfig,
    make_folds,
    nested_cv,
    sample_configs,
    summarize,
)
from .pca import PCA
from .pipeline import SoftSensorPipeline, load_pipeline, save_pipeline
from .preprocessing import Standardizer
from .spectra import (
    CANONICAL_TARGETS,
    DEFAULT_GRID,
    Dataset,
    Sample,
    Spectrum,
    WavelengthGrid,
    average_replicates,
    load_dataset,
    parse_dataset_csv,
    save_dataset,
    serialize_dataset_csv,
    split_features_targets,
    validate_dataset,
)
from .synthgen import (
    GaussianPeak,
    SpeciesProfile,
    SynthConfig,
    absorbance,
    default_config,
    derive_targets,
    epsilon_curve,
    generate_dataset,
)

__all__ = [
    "__version__",
    "CANONICAL_TARGETS",
    "DEFAULT_GRID",
    "CvReport",
    "Dataset",
    "GaussianPeak",
    "HyperRanges",
    "MetricSummary",
    "MlpConfig",
    "MlpModel",
    "PCA",
    "Sample",
    "ShapExplanation",
    "SoftSensorPipeline",
    "SpeciesProfile",
    "Spectrum",
    "Standardizer",
    "SynthConfig",
    "TrainHistory",
    "TrialConfig",
    "WavelengthGrid",
    "absorbance",
    "average_replicates",
    "default_config",
    "derive_targets",
    "epsilon_curve",
    "explain_pipeline",
    "generate_dataset",
    "kernel_shap",
    "load_dataset",
    "load_pipeline",
    "make_folds",
    "mape",
    "nested_cv",
    "parse_dataset_csv",
    "r2",
    "rmse",
    "sample_configs",
    "save_dataset",
    "save_pipeline",
    "serialize_dataset_csv",
    "shap_summary",
    "split_features_targets",
    "summarize",
    "validate_dataset",
]
