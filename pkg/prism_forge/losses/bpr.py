"""
BPR (内積類似度のペアワイズ損失)

L = −Σ ln σ(u·i − u·i′)  (正例と負例の組ごとに1項)
"""

from typing import Tuple

import numpy as np
from scipy.special import expit, log_expit

from ..data.interactions import Batch
from ..exceptions import ConfigError
from .base import GradientBuffer, build_buffer


def bpr(
    batch: Batch, users: np.ndarray, items: np.ndarray, reduction: str = "sum"
) -> Tuple[float, GradientBuffer]:
    """BPR損失と解析勾配"""
    if batch.gamma < 1:
        raise ConfigError("BPRには正例ごとに1つ以上の負例が必要です")

    u = users[batch.users]
    pos = items[batch.items]
    neg = items[batch.negatives]

    margin = np.sum(u * pos, axis=1)[:, None] - np.einsum("pd,pgd->pg", u, neg)
    # ln σ(x) = −softplus(−x)
    loss = -float(np.sum(log_expit(margin)))

    # dL/dx = −σ(−x)
    coeff = -expit(-margin)
    scale = 1.0 / len(batch) if reduction == "mean" else 1.0
    loss *= scale
    coeff = coeff * scale

    coeff_sum = coeff.sum(axis=1)
    grad_u = coeff_sum[:, None] * pos - np.einsum("pg,pgd->pd", coeff, neg)
    grad_pos = coeff_sum[:, None] * u
    grad_neg = -coeff[:, :, None] * u[:, None, :]

    dim = users.shape[1]
    return loss, build_buffer(
        batch.users,
        grad_u,
        np.concatenate([batch.items, batch.negatives.ravel()]),
        np.concatenate([grad_pos, grad_neg.reshape(-1, dim)]),
    )
