"""Low-rank matrix estimation by Schatten-p penalized trace regression."""

from .calibration import CalibrationParams, effective_noise, lambda_auto, p_auto, ri_inflation
from .datagen import BoundedBernstein, Dataset, Gaussian, gen_dataset, gen_ground_truth, gen_masks
from .densela import rank_split, schatten, svd
from .errors import (ConfigurationError, DivergenceError, InvalidInputError,
                     InvalidParameterError, LrmError)
from .experiments import StudyConfig, coverage_study, noise_study, rate_study
from .metrics import bound_check, error_report, prediction_error
from .prox import ProxParams, matrix_prox, scalar_prox
from .sampling import SamplingOperator, operator_norm, phi_max1
from .solver import EstimatorConfig, FitResult, fit

__version__ = "0.1.0"
