"""
埋め込みノルムと人気度の相関診断
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..exceptions import ConfigError
from .table import EmbeddingTable, magnitudes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MagnitudeReport:
    """ノルムと人気度の相関

    pearson_log は (log(d+2), ||x||) のPearson、spearman は (d, ||x||) の順位相関。
    次数が定数などで相関が定義できない場合は NaN と `defined=False`。
    """

    magnitudes: np.ndarray
    pearson_log: float
    spearman: float
    defined: bool

    @property
    def n_entities(self) -> int:
        return int(self.magnitudes.shape[0])


def magnitude_popularity_correlation(table: EmbeddingTable, degree: np.ndarray) -> MagnitudeReport:
    """ノルム・人気度相関を計算"""
    degree = np.asarray(degree, dtype=np.float64)
    norms = magnitudes(table)
    if degree.shape != norms.shape:
        raise ConfigError(f"次数ベクトルの長さ {degree.shape} がテーブル行数 {norms.shape} と一致しません")

    if norms.shape[0] < 3 or np.ptp(degree) == 0 or np.ptp(norms) == 0:
        logger.warning("相関が定義できません (エンティティ数 %d, 次数または ノルムが定数)", norms.shape[0])
        return MagnitudeReport(norms, float("nan"), float("nan"), defined=False)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        pearson = stats.pearsonr(np.log(degree + 2.0), norms)[0]
        spearman = stats.spearmanr(degree, norms)[0]
    return MagnitudeReport(norms, float(pearson), float(spearman), defined=True)
