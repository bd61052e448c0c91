"""
損失関数のディスパッチと角度ベース性 (スケール不変性) の検査
"""

from typing import Optional, Tuple, Union

import numpy as np

from ..data.interactions import Batch
from ..exceptions import ConfigError
from .base import GradientBuffer, LossSpec, MarginTable
from .bpr import bpr
from .directau import directau
from .mawu import mawu
from .ssm import ssm

ScaleLike = Union[float, np.ndarray]


def compute_loss(
    spec: LossSpec,
    batch: Batch,
    users: np.ndarray,
    items: np.ndarray,
    margins: Optional[MarginTable] = None,
) -> Tuple[float, GradientBuffer]:
    """LossSpec に従って損失と勾配を計算"""
    if spec.kind == "BPR":
        return bpr(batch, users, items, reduction=spec.reduction)
    if spec.kind == "SSM":
        return ssm(batch, users, items, temperature=spec.temperature, reduction=spec.reduction)
    if spec.kind == "DirectAU":
        return directau(batch, users, items, gamma=spec.gamma_uniformity, reduction=spec.reduction)
    if spec.kind == "MAWU":
        if margins is None:
            raise ConfigError("MAWUにはマージンテーブルが必要です")
        return mawu(
            batch, users, items, margins,
            gamma_user=spec.gamma_user, gamma_item=spec.gamma_item, reduction=spec.reduction,
        )
    raise ConfigError(f"train.loss.kind が不正です: {spec.kind}")


def _scaled(values: np.ndarray, scale: ScaleLike) -> np.ndarray:
    factors = np.asarray(scale, dtype=np.float64)
    if np.any(factors <= 0):
        raise ConfigError("スケール係数は正である必要があります")
    return values * (factors[:, None] if factors.ndim == 1 else factors)


def check_scale_invariance(
    spec: LossSpec,
    batch: Batch,
    users: np.ndarray,
    items: np.ndarray,
    user_scale: ScaleLike,
    item_scale: ScaleLike,
    margins: Optional[MarginTable] = None,
) -> float:
    """|L(cU, c′I) − L(U, I)| を返す (スカラーまたは行ごとの正の係数)"""
    base, _ = compute_loss(spec, batch, users, items, margins)
    scaled, _ = compute_loss(spec, batch, _scaled(users, user_scale), _scaled(items, item_scale), margins)
    return abs(scaled - base)
