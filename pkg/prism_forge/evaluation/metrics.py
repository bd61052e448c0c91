"""
ユーザー単位の NDCG@K と層別分解

K = min(K_cap, N(u))。N(u) はそのユーザーの正解アイテム数。
window="user" (既定) は DCG も IDCG も先頭 K 位置で打ち切る。
window="cap" は K_cap 位置まで DCG を数え、IDCG のみ K で打ち切る。
層別NDCGは同じ IDCG を使い、層の外のアイテムの関連度を0にする。
"""

from typing import Collection, Dict, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import STRATA, SUPPORTED_NDCG_WINDOWS
from ..exceptions import ConfigError


def discounts(k_cap: int) -> np.ndarray:
    """位置 1..K_cap の割引 1/log2(pos + 1)"""
    return 1.0 / np.log2(np.arange(2, k_cap + 2, dtype=np.float64))


def ideal_dcg(n_relevant: np.ndarray, k_cap: int) -> np.ndarray:
    """先頭 min(K_cap, N(u)) 位置がすべて正解のときの DCG"""
    cumulative = np.concatenate([[0.0], np.cumsum(discounts(k_cap))])
    return cumulative[np.minimum(np.asarray(n_relevant), k_cap)]


def position_window(n_relevant: np.ndarray, k_cap: int, window: str) -> np.ndarray:
    """DCG に数える位置のマスク (ユーザー数 × K_cap)"""
    if window not in SUPPORTED_NDCG_WINDOWS:
        raise ConfigError(f"NDCGの窓ルールが不正です: {window}")
    n_relevant = np.atleast_1d(np.asarray(n_relevant))
    positions = np.arange(k_cap)[None, :]
    if window == "cap":
        return np.ones((n_relevant.shape[0], k_cap), dtype=bool)
    return positions < np.minimum(n_relevant, k_cap)[:, None]


def ndcg_at_k(
    ranked: Sequence[int], relevant: Collection[int], k_cap: int = 20, window: str = "user"
) -> float:
    """1ユーザーの NDCG@K (relevant は空でないこと)"""
    if not relevant:
        raise ConfigError("正解アイテムが空のユーザーは評価できません")
    stratified = stratified_ndcg(ranked, relevant, None, k_cap, window)
    return float(sum(stratified.values()))


def stratified_ndcg(
    ranked: Sequence[int],
    relevant: Collection[int],
    labels: Optional[np.ndarray],
    k_cap: int = 20,
    window: str = "user",
) -> Dict[str, float]:
    """1ユーザーの層別 NDCG (popular, neutral, unpopular)

    labels が None のときは全アイテムを popular とみなす (全体値の計算用)。
    """
    if not relevant:
        raise ConfigError("正解アイテムが空のユーザーは評価できません")
    relevant_set = set(int(i) for i in relevant)
    ranked = [int(i) for i in list(ranked)[:k_cap]]
    n_relevant = len(relevant_set)

    mask = position_window(np.array([n_relevant]), k_cap, window)[0]
    disc = discounts(k_cap)
    idcg = float(ideal_dcg(np.array(n_relevant), k_cap))

    parts = {name: 0.0 for name in STRATA}
    for position, item in enumerate(ranked):
        if mask[position] and item in relevant_set:
            stratum = STRATA[int(labels[item])] if labels is not None else STRATA[0]
            parts[stratum] += disc[position]
    return {name: value / idcg for name, value in parts.items()}


def ndcg_from_hits(
    hits: np.ndarray,
    hit_labels: np.ndarray,
    n_relevant: np.ndarray,
    k_cap: int,
    window: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """上位K_capの的中行列から全体NDCGと層別NDCG (ユーザー数 × 3) を求める"""
    gains = hits & position_window(n_relevant, k_cap, window)
    weighted = gains * discounts(k_cap)[None, :]
    idcg = ideal_dcg(n_relevant, k_cap)

    overall = weighted.sum(axis=1) / idcg
    strata = np.stack(
        [np.where(hit_labels == code, weighted, 0.0).sum(axis=1) / idcg for code in range(len(STRATA))],
        axis=1,
    )
    return overall, strata
