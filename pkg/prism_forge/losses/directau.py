"""
DirectAU (アラインメント + 一様性)

L = Σ_{(u,i)∈B} ||ū − ī||² + γ·[ log Σ_{u≠u′} e^{−2||ū−ū′||²} + log Σ_{i≠i′} e^{−2||ī−ī′||²} ]
(バーは行の L2 正規化。一様性はバッチ内の異なるエンティティの組で計算する)
"""

from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from ..data.interactions import Batch
from ..exceptions import DegenerateInputError
from .base import GradientBuffer, project_to_tangent, unit_rows


def uniformity(unit: np.ndarray) -> Tuple[float, np.ndarray]:
    """log Σ_{a≠b} exp(−2||x_a − x_b||²) と各行への勾配"""
    if unit.shape[0] < 2:
        raise DegenerateInputError("一様性項には2つ以上の異なるエンティティが必要です")
    sq = np.sum(unit * unit, axis=1)
    dist = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (unit @ unit.T), 0.0)
    logits = -2.0 * dist
    np.fill_diagonal(logits, -np.inf)
    value = float(logsumexp(logits))

    # 順序対 (a,b) と (b,a) の両方が x_a に寄与する
    weights = np.exp(logits - value)
    grad = -8.0 * (weights.sum(axis=1)[:, None] * unit - weights @ unit)
    return value, grad


def unique_batch_rows(batch: Batch) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    uniq_users, inv_users = np.unique(batch.users, return_inverse=True)
    uniq_items, inv_items = np.unique(batch.items, return_inverse=True)
    if uniq_users.shape[0] < 2 or uniq_items.shape[0] < 2:
        raise DegenerateInputError("バッチには2人以上のユーザーと2つ以上のアイテムが必要です")
    return uniq_users, inv_users.ravel(), uniq_items, inv_items.ravel()


def directau(
    batch: Batch,
    users: np.ndarray,
    items: np.ndarray,
    gamma: float = 1.0,
    reduction: str = "sum",
) -> Tuple[float, GradientBuffer]:
    """DirectAU損失と、正規化を通した解析勾配"""
    uniq_users, inv_users, uniq_items, inv_items = unique_batch_rows(batch)
    u_hat, u_norm = unit_rows(users[uniq_users], "ユーザー埋め込み")
    i_hat, i_norm = unit_rows(items[uniq_items], "アイテム埋め込み")

    scale = 1.0 / len(batch) if reduction == "mean" else 1.0
    diff = u_hat[inv_users] - i_hat[inv_items]
    align = float(np.sum(diff * diff)) * scale

    grad_u_hat = np.zeros_like(u_hat)
    grad_i_hat = np.zeros_like(i_hat)
    np.add.at(grad_u_hat, inv_users, 2.0 * scale * diff)
    np.add.at(grad_i_hat, inv_items, -2.0 * scale * diff)

    uniform_users, grad_uniform_users = uniformity(u_hat)
    uniform_items, grad_uniform_items = uniformity(i_hat)
    grad_u_hat += gamma * grad_uniform_users
    grad_i_hat += gamma * grad_uniform_items

    loss = align + gamma * (uniform_users + uniform_items)
    return loss, GradientBuffer(
        uniq_users,
        project_to_tangent(grad_u_hat, u_hat, u_norm),
        uniq_items,
        project_to_tangent(grad_i_hat, i_hat, i_norm),
    )
