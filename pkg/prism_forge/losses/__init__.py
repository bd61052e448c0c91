"""ランキング損失と重み減衰モジュール"""

from .base import (
    DecaySpec,
    GradientBuffer,
    LossSpec,
    MarginTable,
    is_angle_based,
)
from .bpr import bpr
from .decay import apply_weight_decay, decay_factor
from .directau import directau, uniformity
from .mawu import clamp_margins, mawu
from .registry import check_scale_invariance, compute_loss
from .ssm import ssm

__all__ = [
    "DecaySpec",
    "GradientBuffer",
    "LossSpec",
    "MarginTable",
    "apply_weight_decay",
    "bpr",
    "check_scale_invariance",
    "clamp_margins",
    "compute_loss",
    "decay_factor",
    "directau",
    "is_angle_based",
    "mawu",
    "ssm",
    "uniformity",
]
