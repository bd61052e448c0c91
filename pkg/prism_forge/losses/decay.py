"""
重み減衰 (SGDステップ内の乗算因子 1 − ηλ)
"""

from typing import Optional

import numpy as np

from ..data.interactions import Batch
from ..exceptions import ConfigError


def decay_factor(eta: float, lam: float) -> float:
    """1 − ηλ (0 <= ηλ < 1 のみ受け付ける)"""
    product = eta * lam
    if not 0.0 <= product < 1.0:
        raise ConfigError(f"ηλ = {product} は [0, 1) の範囲が必要です (埋め込みを破壊します)")
    return 1.0 - product


def apply_weight_decay(
    users: np.ndarray,
    items: np.ndarray,
    eta: float,
    lam: float,
    mode: str,
    batch: Optional[Batch] = None,
) -> None:
    """埋め込みを (1 − ηλ) 倍に縮める (インプレース)

    full: 全行、batched: バッチで勾配を受けた行のみ、none: 何もしない。
    """
    factor = decay_factor(eta, lam)
    if mode == "none" or lam == 0.0:
        return
    if mode == "full":
        users *= factor
        items *= factor
    elif mode == "batched":
        if batch is None:
            raise ConfigError("batched モードにはバッチが必要です")
        users[batch.touched_users()] *= factor
        items[batch.touched_items()] *= factor
    else:
        raise ConfigError(f"train.decay.mode が不正です: {mode}")
