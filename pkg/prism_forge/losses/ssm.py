"""
サンプルドソフトマックス (SSM)

L = −Σ log[ exp(c⁺/τ) / (exp(c⁺/τ) + Σ_{i′∈S} exp(c⁻/τ)) ]  (c はコサイン類似度)
"""

from typing import Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from ..data.interactions import Batch
from ..exceptions import ConfigError
from .base import GradientBuffer, build_buffer, unit_rows


def cosine_gradients(
    coeff: np.ndarray,
    u_hat: np.ndarray,
    u_norm: np.ndarray,
    x_hat: np.ndarray,
    x_norm: np.ndarray,
    cos: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """coeff·cos(u, x) の勾配

    ∂cos/∂u = (x̂ − cos·û)/||u||,  ∂cos/∂x = (û − cos·x̂)/||x||
    """
    grad_u = coeff[..., None] * (x_hat - cos[..., None] * u_hat) / u_norm[..., None]
    grad_x = coeff[..., None] * (u_hat - cos[..., None] * x_hat) / x_norm[..., None]
    return grad_u, grad_x


def ssm(
    batch: Batch,
    users: np.ndarray,
    items: np.ndarray,
    temperature: float = 1.0,
    reduction: str = "sum",
) -> Tuple[float, GradientBuffer]:
    """SSM損失と解析勾配"""
    if temperature <= 0:
        raise ConfigError("train.loss.temperature は正である必要があります")

    u_hat, u_norm = unit_rows(users[batch.users], "ユーザー埋め込み")
    pos_hat, pos_norm = unit_rows(items[batch.items], "アイテム埋め込み")
    neg_hat, neg_norm = unit_rows(items[batch.negatives], "負例アイテム埋め込み")

    cos_pos = np.sum(u_hat * pos_hat, axis=1)
    cos_neg = np.einsum("pd,pgd->pg", u_hat, neg_hat)

    logits = np.concatenate([cos_pos[:, None], cos_neg], axis=1) / temperature
    loss = float(np.sum(logsumexp(logits, axis=1) - logits[:, 0]))

    # dL/dlogit = softmax − onehot(正例)
    weights = softmax(logits, axis=1)
    weights[:, 0] -= 1.0
    weights /= temperature

    scale = 1.0 / len(batch) if reduction == "mean" else 1.0
    loss *= scale
    weights *= scale

    grad_u_pos, grad_pos = cosine_gradients(weights[:, 0], u_hat, u_norm, pos_hat, pos_norm, cos_pos)
    grad_u_neg, grad_neg = cosine_gradients(
        weights[:, 1:], u_hat[:, None, :], u_norm[:, None], neg_hat, neg_norm, cos_neg
    )
    grad_u = grad_u_pos + grad_u_neg.sum(axis=1)

    dim = users.shape[1]
    return loss, build_buffer(
        batch.users,
        grad_u,
        np.concatenate([batch.items, batch.negatives.ravel()]),
        np.concatenate([grad_pos, grad_neg.reshape(-1, dim)]),
    )
