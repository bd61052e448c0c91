"""
ランキングと評価 (内積 / コサイン)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..config.settings import STRATA, SUPPORTED_NDCG_WINDOWS, SUPPORTED_SCORERS
from ..data.interactions import InteractionSet, SplitData, StrataAssignment
from ..embeddings.table import EmbeddingTable
from ..exceptions import ConfigError, DegenerateInputError, EmptyDataError, EvaluationError
from .metrics import ndcg_from_hits

logger = logging.getLogger(__name__)

DECOMPOSITION_TOLERANCE = 1e-9
USER_CHUNK = 1024

METRICS_COLUMNS = [
    "run",
    "scorer",
    "window",
    "ndcg_overall",
    "ndcg_popular",
    "ndcg_neutral",
    "ndcg_unpopular",
    "debias_ratio",
    "n_users_evaluated",
]

TableLike = Union[EmbeddingTable, np.ndarray]


@dataclass(frozen=True)
class ScorerConfig:
    """類似度と K_cap、NDCGの窓ルール"""

    similarity: str = "dot"
    k_cap: int = 20
    window: str = "user"

    def __post_init__(self) -> None:
        if self.similarity not in SUPPORTED_SCORERS:
            raise ConfigError(f"scorer が不正です: {self.similarity}")
        if self.k_cap < 1:
            raise ConfigError(f"train.eval_k は1以上が必要です: {self.k_cap}")
        if self.window not in SUPPORTED_NDCG_WINDOWS:
            raise ConfigError(f"train.window が不正です: {self.window}")


@dataclass(frozen=True)
class MetricsReport:
    """全体・層別NDCG@K (ユーザー平均) と debias 比"""

    ndcg_overall: float
    ndcg_popular: float
    ndcg_neutral: float
    ndcg_unpopular: float
    n_users_evaluated: int
    max_decomposition_error: float = 0.0
    per_user: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def debias_ratio(self) -> float:
        """unpopular / popular (popular が0なら NaN)"""
        if self.ndcg_popular == 0:
            return float("nan")
        return self.ndcg_unpopular / self.ndcg_popular

    def as_row(self, run: str, scorer: ScorerConfig) -> Dict[str, object]:
        return {
            "run": run,
            "scorer": scorer.similarity,
            "window": scorer.window,
            "ndcg_overall": self.ndcg_overall,
            "ndcg_popular": self.ndcg_popular,
            "ndcg_neutral": self.ndcg_neutral,
            "ndcg_unpopular": self.ndcg_unpopular,
            "debias_ratio": self.debias_ratio,
            "n_users_evaluated": self.n_users_evaluated,
        }


def _values(table: TableLike) -> np.ndarray:
    return table.values if isinstance(table, EmbeddingTable) else np.asarray(table, dtype=np.float64)


def _scoring_rows(values: np.ndarray, similarity: str) -> np.ndarray:
    if similarity == "dot":
        return values
    norms = np.linalg.norm(values, axis=1)
    if np.any(norms == 0):
        raise DegenerateInputError("コサインスコアにノルム0の行は使えません")
    return values / norms[:, None]


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """スコア降順 (同点はアイテム番号昇順) の上位k件 (行ごと)

    全体ソートの代わりに k 番目の値を閾値にして候補を絞る。
    """
    n_rows, n_items = scores.shape
    k = min(k, n_items)
    if k == n_items:
        return np.argsort(-scores, axis=1, kind="stable")

    threshold = -np.partition(-scores, k - 1, axis=1)[:, k - 1:k]
    above = scores > threshold
    tied = scores == threshold
    room = k - above.sum(axis=1, keepdims=True)
    selected = above | (tied & (np.cumsum(tied, axis=1) <= room))

    # 各行ちょうど k 件、np.nonzero は列番号昇順で返す
    candidates = np.nonzero(selected)[1].reshape(n_rows, k)
    candidate_scores = np.take_along_axis(scores, candidates, axis=1)
    order = np.argsort(-candidate_scores, axis=1, kind="stable")
    return np.take_along_axis(candidates, order, axis=1)


def rank_items(
    user: int,
    users: TableLike,
    items: TableLike,
    scorer: ScorerConfig,
    exclusion: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """1ユーザーの上位K件 (除外アイテムは返さない)"""
    user_values = _values(users)
    item_values = _values(items)
    excluded = np.zeros(item_values.shape[0], dtype=bool)
    if exclusion is not None:
        excluded[np.asarray(list(exclusion), dtype=np.int64)] = True
    k = scorer.k_cap
    if k > int((~excluded).sum()):
        raise ConfigError(f"除外後のアイテム数が K={k} より少なくなります")

    query = _scoring_rows(user_values[user:user + 1], scorer.similarity)
    scores = query @ _scoring_rows(item_values, scorer.similarity).T
    scores[:, excluded] = -np.inf
    return top_k(scores, k)[0]


def evaluate(
    users: TableLike,
    items: TableLike,
    target: InteractionSet,
    strata: StrataAssignment,
    scorer: ScorerConfig,
    exclude: Sequence[InteractionSet] = (),
    keep_per_user: bool = False,
) -> MetricsReport:
    """target 分割の全体・層別NDCG@Kを計算

    target が空のユーザーは平均から除く。exclude に渡した分割の
    インタラクションは候補から外す。既定は除外なしなので、分割単位の評価は
    `evaluate_split` を使う。
    """
    user_rows = _scoring_rows(_values(users), scorer.similarity)
    item_rows = _scoring_rows(_values(items), scorer.similarity)
    if scorer.k_cap > item_rows.shape[0]:
        raise ConfigError(f"K_cap={scorer.k_cap} がアイテム数 {item_rows.shape[0]} を超えています")

    relevant = target.to_csr()
    n_relevant_all = np.diff(relevant.indptr)
    evaluable = np.flatnonzero(n_relevant_all > 0)
    if evaluable.size == 0:
        raise EmptyDataError("評価できるユーザーがいません")

    excluded = None
    for part in exclude:
        csr = part.to_csr()
        excluded = csr if excluded is None else excluded + csr

    overall_parts = []
    strata_parts = []
    for start in range(0, evaluable.size, USER_CHUNK):
        rows = evaluable[start:start + USER_CHUNK]
        scores = user_rows[rows] @ item_rows.T
        if excluded is not None:
            scores[excluded[rows].toarray() > 0] = -np.inf

        ranked = top_k(scores, scorer.k_cap)
        hits = np.take_along_axis(relevant[rows].toarray() > 0, ranked, axis=1)
        hits &= np.isfinite(np.take_along_axis(scores, ranked, axis=1))
        overall, stratified = ndcg_from_hits(
            hits, strata.labels[ranked], n_relevant_all[rows], scorer.k_cap, scorer.window
        )
        overall_parts.append(overall)
        strata_parts.append(stratified)

    overall = np.concatenate(overall_parts)
    stratified = np.concatenate(strata_parts)
    decomposition_error = float(np.max(np.abs(stratified.sum(axis=1) - overall)))
    if decomposition_error > DECOMPOSITION_TOLERANCE:
        raise EvaluationError(f"層別NDCGの和が全体NDCGと一致しません (誤差 {decomposition_error:.3e})")

    means = stratified.mean(axis=0)
    logger.debug("evaluated %d users with %s scorer", evaluable.size, scorer.similarity)
    return MetricsReport(
        ndcg_overall=float(overall.mean()),
        ndcg_popular=float(means[STRATA.index("popular")]),
        ndcg_neutral=float(means[STRATA.index("neutral")]),
        ndcg_unpopular=float(means[STRATA.index("unpopular")]),
        n_users_evaluated=int(evaluable.size),
        max_decomposition_error=decomposition_error,
        per_user=np.column_stack([overall, stratified]) if keep_per_user else None,
    )


def evaluate_split(
    users: TableLike,
    items: TableLike,
    data: SplitData,
    scorer: ScorerConfig,
    split: str = "test",
    keep_per_user: bool = False,
) -> MetricsReport:
    """分割を指定して評価する

    test は train ∪ val、val は train を候補から除く。
    """
    if split == "test":
        target, exclude = data.test, (data.train, data.val)
    elif split == "val":
        target, exclude = data.val, (data.train,)
    else:
        raise ConfigError(f"評価分割は test または val です: {split}")
    return evaluate(users, items, target, data.strata, scorer, exclude=exclude, keep_per_user=keep_per_user)


def metrics_frame(rows: Sequence[Dict[str, object]]) -> pd.DataFrame:
    """MetricsReport の行を固定列順の DataFrame にする"""
    return pd.DataFrame(list(rows), columns=METRICS_COLUMNS)
