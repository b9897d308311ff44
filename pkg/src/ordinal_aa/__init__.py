"""Archetypal analysis for ordinal questionnaire data."""

from .core import (
    BoundarySpec,
    OrdinalMatrix,
    Reconstruction,
    SimplexFactor,
    alpha_from_boundaries,
    boundaries_from_free,
    cross_entropy_loss,
    least_squares_loss,
    map_ordinal,
    ordinal_likelihood,
    reconstruct,
)
from .estimators import (
    ArchetypalAnalysis,
    OrdinalArchetypalAnalysis,
    ResponseBiasOrdinalArchetypalAnalysis,
    TwoStepArchetypalAnalysis,
    check_ordinal,
)
from .evaluation import (
    CorruptionPlan,
    SweepReport,
    archetype_profiles,
    corruption_experiment,
    expected_response,
    nmi,
    predict_matrix,
    response_bias_summary,
    stability_sweep,
)
from .exceptions import (
    ConfigurationError,
    DataError,
    FitFailureError,
    InvalidParameterError,
    ModelFileError,
    OrdinalAAError,
    ParseError,
)
from .io import load_csv, load_model, save_csv, save_model
from .solvers import FitConfig, FittedModel, fit, fit_aa, fit_oaa, fit_rboaa, fit_tsaa
from .synthetic import SynthConfig, SynthDataset, generate, large_variant

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec",
    "OrdinalMatrix",
    "Reconstruction",
    "SimplexFactor",
    "alpha_from_boundaries",
    "boundaries_from_free",
    "cross_entropy_loss",
    "least_squares_loss",
    "map_ordinal",
    "ordinal_likelihood",
    "reconstruct",
    "ArchetypalAnalysis",
    "OrdinalArchetypalAnalysis",
    "ResponseBiasOrdinalArchetypalAnalysis",
    "TwoStepArchetypalAnalysis",
    "check_ordinal",
    "CorruptionPlan",
    "SweepReport",
    "archetype_profiles",
    "corruption_experiment",
    "expected_response",
    "nmi",
    "predict_matrix",
    "response_bias_summary",
    "stability_sweep",
    "ConfigurationError",
    "DataError",
    "FitFailureError",
    "InvalidParameterError",
    "ModelFileError",
    "OrdinalAAError",
    "ParseError",
    "load_csv",
    "load_model",
    "save_csv",
    "save_model",
    "FitConfig",
    "FittedModel",
    "fit",
    "fit_aa",
    "fit_oaa",
    "fit_rboaa",
    "fit_tsaa",
    "SynthConfig",
    "SynthDataset",
    "generate",
    "large_variant",
]
