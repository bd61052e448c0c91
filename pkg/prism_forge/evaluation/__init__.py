"""評価モジュール (NDCG@K と層別分解)"""

from .evaluator import (
    METRICS_COLUMNS,
    MetricsReport,
    ScorerConfig,
    evaluate,
    evaluate_split,
    metrics_frame,
    rank_items,
    top_k,
)
from .metrics import ndcg_at_k, stratified_ndcg

__all__ = [
    "METRICS_COLUMNS",
    "MetricsReport",
    "ScorerConfig",
    "evaluate",
    "evaluate_split",
    "metrics_frame",
    "ndcg_at_k",
    "rank_items",
    "stratified_ndcg",
    "top_k",
]
