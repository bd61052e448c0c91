"""ノルム変化の閉形式とモンテカルロ検証"""

from .closed_form import (
    TheoryParams,
    batched_decay_expected_change,
    cosine_ascent_step,
    decay_term,
    dot_update_expected_change,
    euclidean_step,
    expected_magnitude_change,
    inclusion_probability,
    negsample_expected_change,
    ranking_term,
)
from .oracle import (
    HEATMAP_COLUMNS,
    ORACLE_COLUMNS,
    MagnitudeTrace,
    heatmap_grid,
    heatmap_matrix,
    monte_carlo_magnitude,
    oracle_grid,
)

__all__ = [
    "HEATMAP_COLUMNS",
    "ORACLE_COLUMNS",
    "MagnitudeTrace",
    "TheoryParams",
    "batched_decay_expected_change",
    "cosine_ascent_step",
    "decay_term",
    "dot_update_expected_change",
    "euclidean_step",
    "expected_magnitude_change",
    "heatmap_grid",
    "heatmap_matrix",
    "inclusion_probability",
    "monte_carlo_magnitude",
    "negsample_expected_change",
    "oracle_grid",
    "ranking_term",
]
