"""ALPA loss laboratory: Padé-approximant asymmetric loss, baselines, and a long-tailed benchmark."""

from .losses import LossEval, LossKind, LossSpec, Variant, batch_loss, batch_loss_from_logits
from .metrics import MetricsReport
from .pade import ALPA_COEFFICIENTS, PadeApproximant, TaylorSeries, pade_from_taylor

__version__ = "0.1.0"

__all__ = [
    "ALPA_COEFFICIENTS",
    "LossEval",
    "LossKind",
    "LossSpec",
    "MetricsReport",
    "PadeApproximant",
    "TaylorSeries",
    "Variant",
    "batch_loss",
    "batch_loss_from_logits",
    "pade_from_taylor",
]
