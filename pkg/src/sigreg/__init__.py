"""Signature features, ridge regression and truncation-order selection for
regression on multivariate functional data."""

__version__ = "0.1.0"

from .errors import CapacityError, ConditioningError, ConfigError, DataError, SigRegError
from .paths import SampledPath, from_matrix, subdivide, time_augment, total_variation, uniform_times
from .signature import (
    SigShape,
    TruncatedSignature,
    batch_signatures,
    chen_concat,
    identity,
    index_of,
    linear_segment_signature,
    sig_dim,
    signature,
    word_of,
)
from .ridge import RidgeModel, cv_select_lambda, default_lambda_grid, predict, ridge_fit, ridge_path
from .order_selection import (
    OrderSelectionResult,
    PenaltyConfig,
    SignatureModel,
    cv_select_order,
    dimension_jump,
    fit_signature_model,
    penalty,
    risk_curve,
    select_order,
)
from .datagen import SimSpec, generate
from .baselines import FourierModel, fit_fourier_model, fourier_design
from .dataio import ingest_csv

__all__ = [
    "__version__",
    "SigShape",
    "TruncatedSignature",
    "batch_signatures",
    "chen_concat",
    "identity",
    "index_of",
    "linear_segment_signature",
    "sig_dim",
    "signature",
    "word_of",
    "OrderSelectionResult",
    "PenaltyConfig",
    "SignatureModel",
    "cv_select_order",
    "dimension_jump",
    "fit_signature_model",
    "penalty",
    "risk_curve",
    "select_order",
    "CapacityError",
    "ConditioningError",
    "ConfigError",
    "DataError",
    "SigRegError",
    "SampledPath",
    "from_matrix",
    "subdivide",
    "time_augment",
    "total_variation",
    "uniform_times",
    "RidgeModel",
    "cv_select_lambda",
    "default_lambda_grid",
    "predict",
    "ridge_fit",
    "ridge_path",
    "SimSpec",
    "generate",
    "FourierModel",
    "fit_fourier_model",
    "fourier_design",
    "ingest_csv",
]
