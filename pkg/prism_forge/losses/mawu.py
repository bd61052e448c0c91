"""
MAWU (マージン付きアラインメント + 重み付き一様性)

L = −Σ cos(θ_ui + M_u + M_i) + γ_user·uniformity(users) + γ_item·uniformity(items)
"""

from typing import Tuple

import numpy as np

from ..data.interactions import Batch
from ..exceptions import ConfigError
from .base import GradientBuffer, MarginTable, project_to_tangent, unit_rows
from .directau import unique_batch_rows, uniformity

# arccos に渡すコサインのクランプ幅
ARCCOS_CLAMP = 1e-12
# |cos| がこの幅まで1に近いとき arccos の微分を打ち切る
ARCCOS_DERIVATIVE_GUARD = 1e-9

MARGIN_MIN = 0.0
MARGIN_MAX = np.pi / 2


def mawu(
    batch: Batch,
    users: np.ndarray,
    items: np.ndarray,
    margins: MarginTable,
    gamma_user: float = 1.0,
    gamma_item: float = 1.0,
    reduction: str = "sum",
) -> Tuple[float, GradientBuffer]:
    """MAWU損失と、埋め込み・マージンの解析勾配"""
    if batch.users.max() >= margins.user.shape[0] or batch.items.max() >= margins.item.shape[0]:
        raise ConfigError("マージンテーブルがバッチのエンティティを含んでいません")

    uniq_users, inv_users, uniq_items, inv_items = unique_batch_rows(batch)
    u_hat, u_norm = unit_rows(users[uniq_users], "ユーザー埋め込み")
    i_hat, i_norm = unit_rows(items[uniq_items], "アイテム埋め込み")

    cos = np.sum(u_hat[inv_users] * i_hat[inv_items], axis=1)
    theta = np.arccos(np.clip(cos, -1.0 + ARCCOS_CLAMP, 1.0 - ARCCOS_CLAMP))
    angle = theta + margins.user[batch.users] + margins.item[batch.items]

    scale = 1.0 / len(batch) if reduction == "mean" else 1.0
    align = -float(np.sum(np.cos(angle))) * scale
    grad_angle = np.sin(angle) * scale

    guarded = np.clip(cos, -1.0 + ARCCOS_DERIVATIVE_GUARD, 1.0 - ARCCOS_DERIVATIVE_GUARD)
    grad_cos = grad_angle * (-1.0 / np.sqrt(1.0 - guarded * guarded))

    grad_u_hat = np.zeros_like(u_hat)
    grad_i_hat = np.zeros_like(i_hat)
    np.add.at(grad_u_hat, inv_users, grad_cos[:, None] * i_hat[inv_items])
    np.add.at(grad_i_hat, inv_items, grad_cos[:, None] * u_hat[inv_users])

    uniform_users, grad_uniform_users = uniformity(u_hat)
    uniform_items, grad_uniform_items = uniformity(i_hat)
    grad_u_hat += gamma_user * grad_uniform_users
    grad_i_hat += gamma_item * grad_uniform_items

    grad_user_margin = np.zeros(uniq_users.shape[0])
    grad_item_margin = np.zeros(uniq_items.shape[0])
    np.add.at(grad_user_margin, inv_users, grad_angle)
    np.add.at(grad_item_margin, inv_items, grad_angle)

    loss = align + gamma_user * uniform_users + gamma_item * uniform_items
    return loss, GradientBuffer(
        uniq_users,
        project_to_tangent(grad_u_hat, u_hat, u_norm),
        uniq_items,
        project_to_tangent(grad_i_hat, i_hat, i_norm),
        user_margin_grad=grad_user_margin,
        item_margin_grad=grad_item_margin,
    )


def clamp_margins(margins: MarginTable) -> None:
    """SGD更新後にマージンを [0, π/2] に収める"""
    np.clip(margins.user, MARGIN_MIN, MARGIN_MAX, out=margins.user)
    np.clip(margins.item, MARGIN_MIN, MARGIN_MAX, out=margins.item)
