"""Goal-oriented atomistic/continuum adaptivity for a periodic Frenkel-Kontorova chain."""

from .adaptive import AdaptiveConfig, IterationRecord, mark_atoms, run_adaptive
from .api import AdaptiveQuasicontinuum, ModelingErrorEstimator
from .estimator import EstimatorReport, QuantityOfInterest, estimate, exact_error
from .linalg import NotPositiveDefinite
from .model import ModelParams, Partition

__all__ = [
    "AdaptiveConfig",
    "AdaptiveQuasicontinuum",
    "EstimatorReport",
    "IterationRecord",
    "ModelParams",
    "ModelingErrorEstimator",
    "NotPositiveDefinite",
    "Partition",
    "QuantityOfInterest",
    "estimate",
    "exact_error",
    "mark_atoms",
    "run_adaptive",
]

__version__ = "0.1.0"
