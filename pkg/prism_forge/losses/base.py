"""
損失関数の共通型とヘルパー
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..config.settings import (
    ANGLE_BASED_LOSSES,
    SUPPORTED_DECAY_MODES,
    SUPPORTED_LOSSES,
    SUPPORTED_REDUCTIONS,
)
from ..exceptions import ConfigError, DegenerateInputError


@dataclass(frozen=True)
class DecaySpec:
    """重み減衰のモード (none / full / batched) と強さ λ"""

    mode: str = "full"
    lam: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in SUPPORTED_DECAY_MODES:
            raise ConfigError(f"train.decay.mode が不正です: {self.mode}")
        if not self.lam >= 0:
            raise ConfigError(f"train.decay.lambda は0以上が必要です: {self.lam}")


@dataclass(frozen=True)
class LossSpec:
    """ランキング損失の種類とハイパーパラメータ"""

    kind: str = "DirectAU"
    gamma_uniformity: float = 1.0
    gamma_user: float = 1.0
    gamma_item: float = 1.0
    n_negatives: int = 10
    temperature: float = 1.0
    reduction: str = "sum"
    decay: DecaySpec = field(default_factory=DecaySpec)

    def __post_init__(self) -> None:
        if self.kind not in SUPPORTED_LOSSES:
            raise ConfigError(f"train.loss.kind が不正です: {self.kind}")
        if not self.temperature > 0:
            raise ConfigError(f"train.loss.temperature は正である必要があります: {self.temperature}")
        if self.kind in ("BPR", "SSM") and self.n_negatives < 1:
            raise ConfigError(f"train.loss.n_negatives は1以上が必要です: {self.n_negatives}")
        if self.n_negatives < 0:
            raise ConfigError(f"train.loss.n_negatives は0以上が必要です: {self.n_negatives}")
        if self.reduction not in SUPPORTED_REDUCTIONS:
            raise ConfigError(f"train.loss.reduction が不正です: {self.reduction}")
        for name in ("gamma_uniformity", "gamma_user", "gamma_item"):
            if getattr(self, name) < 0:
                raise ConfigError(f"train.loss.{name} は0以上が必要です")

    @property
    def negatives_per_positive(self) -> int:
        """バッチに付ける負例数 (DirectAU/MAWUは負例を使わない)"""
        return self.n_negatives if self.kind in ("BPR", "SSM") else 0


@dataclass
class MarginTable:
    """MAWUのユーザー・アイテムごとのマージン (0で初期化)"""

    user: np.ndarray
    item: np.ndarray

    @classmethod
    def zeros(cls, n_users: int, n_items: int) -> "MarginTable":
        return cls(np.zeros(n_users, dtype=np.float64), np.zeros(n_items, dtype=np.float64))

    def copy(self) -> "MarginTable":
        return MarginTable(self.user.copy(), self.item.copy())


@dataclass
class GradientBuffer:
    """バッチで触れたエンティティだけの疎な勾配

    インデックスは昇順、同じエンティティへの寄与は合算済み。
    """

    user_index: np.ndarray
    user_grad: np.ndarray
    item_index: np.ndarray
    item_grad: np.ndarray
    user_margin_grad: Optional[np.ndarray] = None
    item_margin_grad: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, dim: int) -> "GradientBuffer":
        index = np.empty(0, dtype=np.int64)
        return cls(index, np.empty((0, dim)), index.copy(), np.empty((0, dim)))

    def dense_users(self, n_users: int) -> np.ndarray:
        out = np.zeros((n_users, self.user_grad.shape[1]))
        out[self.user_index] = self.user_grad
        return out

    def dense_items(self, n_items: int) -> np.ndarray:
        out = np.zeros((n_items, self.item_grad.shape[1]))
        out[self.item_index] = self.item_grad
        return out

    def is_finite(self) -> bool:
        parts = [self.user_grad, self.item_grad, self.user_margin_grad, self.item_margin_grad]
        return all(np.all(np.isfinite(p)) for p in parts if p is not None)


def scatter_rows(rows: np.ndarray, grads: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """同じ行への勾配を合算 (np.add.at は先頭から順に足すので再現性がある)"""
    index, inverse = np.unique(rows, return_inverse=True)
    out = np.zeros((index.shape[0],) + grads.shape[1:], dtype=np.float64)
    np.add.at(out, inverse.ravel(), grads)
    return index, out


def build_buffer(
    user_rows: np.ndarray,
    user_grads: np.ndarray,
    item_rows: np.ndarray,
    item_grads: np.ndarray,
) -> GradientBuffer:
    user_index, user_grad = scatter_rows(user_rows, user_grads)
    item_index, item_grad = scatter_rows(item_rows, item_grads)
    return GradientBuffer(user_index, user_grad, item_index, item_grad)


def unit_rows(values: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    """行を単位ベクトルにし、(単位ベクトル, ノルム) を返す"""
    norms = np.linalg.norm(values, axis=-1)
    if np.any(norms == 0):
        raise DegenerateInputError(f"{what}にノルム0の行があります (コサインが定義できません)")
    return values / norms[..., None], norms


def project_to_tangent(grad_unit: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """正規化 x/||x|| を通した連鎖律: (g − (g·x̂)x̂) / ||x||"""
    radial = np.sum(grad_unit * unit, axis=-1, keepdims=True)
    return (grad_unit - radial * unit) / norms[..., None]


def is_angle_based(kind: str) -> bool:
    """行ごとの正のスケーリングで損失値が変わらない損失か"""
    if kind not in SUPPORTED_LOSSES:
        raise ConfigError(f"train.loss.kind が不正です: {kind}")
    return kind in ANGLE_BASED_LOSSES
