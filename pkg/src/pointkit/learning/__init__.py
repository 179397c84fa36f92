from .losses import (
    LossKind,
    NonPositiveIntensityError,
    loss_ce,
    loss_lse,
    loss_mle,
    loss_terms,
)
from .optim import AdamState, adam_step, sgd_step
from .train import (
    EpochRecord,
    FitConfig,
    FitDivergedError,
    FitReport,
    evaluate,
    fit,
    project_nonnegative,
    regularization,
    sequence_log_likelihood,
    validation,
)

__all__ = [
    "LossKind", "NonPositiveIntensityError", "loss_ce", "loss_lse", "loss_mle", "loss_terms",
    "AdamState", "adam_step", "sgd_step", "EpochRecord", "FitConfig", "FitDivergedError", "FitReport",
    "evaluate", "fit", "project_nonnegative", "regularization", "sequence_log_likelihood", "validation",
]
