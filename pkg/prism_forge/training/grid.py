"""
ハイパーパラメータのグリッド探索

セルごとに独立して学習し、検証NDCG (内積) が最大のセルを選ぶ。
失敗したセルは status=failed として表に残し、探索は続ける。
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd

from ..data.interactions import SplitData
from ..exceptions import ConfigError, PrismForgeError
from .trainer import EpochLog, TrainConfig, TrainedModel, train

logger = logging.getLogger(__name__)

GRID_COLUMNS = [
    "cell",
    "learning_rate",
    "lambda",
    "gamma",
    "status",
    "best_val_ndcg",
    "best_epoch",
    "epochs_run",
    "error",
]

T = TypeVar("T")
R = TypeVar("R")


def run_parallel(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> Iterator[R]:
    """jobs > 1 ならプロセスプールで実行 (結果は入力順)"""
    if jobs < 1:
        raise ConfigError(f"experiment.jobs は1以上が必要です: {jobs}")
    if jobs == 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        yield from executor.map(fn, items)


@dataclass
class CellOutcome:
    config: Optional[TrainConfig]
    model: Optional[TrainedModel] = None
    log: Optional[EpochLog] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.model is not None

    @property
    def best_val_ndcg(self) -> float:
        if self.log is None or not self.log.records:
            return float("nan")
        scores = np.array([r.val_ndcg_dot for r in self.log.records], dtype=np.float64)
        return float(np.nanmax(scores)) if not np.all(np.isnan(scores)) else float("nan")

    def rank_key(self) -> float:
        score = self.best_val_ndcg
        return -math.inf if math.isnan(score) else score


@dataclass
class GridResult:
    table: pd.DataFrame
    best_model: Optional[TrainedModel]
    best_log: Optional[EpochLog]

    @property
    def best_config(self) -> Optional[TrainConfig]:
        return self.best_model.config if self.best_model is not None else None


def _cell_config(base: TrainConfig, learning_rate: float, lam: float, gamma: Optional[float]) -> TrainConfig:
    loss = replace(base.loss, decay=replace(base.loss.decay, lam=lam))
    if gamma is not None:
        loss = replace(loss, gamma_uniformity=gamma)
    return base.evolve(learning_rate=learning_rate, loss=loss)


def _run_cell(task: Tuple[TrainConfig, float, float, Optional[float], SplitData]) -> CellOutcome:
    base, learning_rate, lam, gamma, data = task
    config: Optional[TrainConfig] = None
    try:
        config = _cell_config(base, learning_rate, lam, gamma)
        model, log = train(config, data)
        return CellOutcome(config, model, log)
    except PrismForgeError as e:
        return CellOutcome(config, error=str(e))


def grid_search(
    base_config: TrainConfig,
    lr_grid: Sequence[float],
    lambda_grid: Sequence[float],
    data: SplitData,
    gamma_grid: Optional[Sequence[float]] = None,
    jobs: int = 1,
) -> GridResult:
    """学習率 × 重み減衰 (× DirectAUのγ) の全組み合わせを学習"""
    if not lr_grid or not lambda_grid:
        raise ConfigError("lr_grid と lambda_grid は空にできません")
    gammas: List[Optional[float]] = list(gamma_grid) if gamma_grid else [None]
    cells = list(itertools.product(lr_grid, lambda_grid, gammas))
    tasks = [(base_config, float(lr), float(lam), gamma, data) for lr, lam, gamma in cells]

    rows = []
    best: Optional[CellOutcome] = None
    for index, ((lr, lam, gamma), outcome) in enumerate(zip(cells, run_parallel(_run_cell, tasks, jobs))):
        if not outcome.ok:
            logger.warning("grid cell %d (lr=%s, lambda=%s) failed: %s", index, lr, lam, outcome.error)
        elif best is None or outcome.rank_key() > best.rank_key():
            best = outcome
        rows.append(
            {
                "cell": index,
                "learning_rate": float(lr),
                "lambda": float(lam),
                "gamma": float(gamma) if gamma is not None else base_config.loss.gamma_uniformity,
                "status": "ok" if outcome.ok else "failed",
                "best_val_ndcg": outcome.best_val_ndcg,
                "best_epoch": outcome.model.best_epoch if outcome.model else 0,
                "epochs_run": outcome.model.epochs_run if outcome.model else 0,
                "error": outcome.error,
            }
        )

    table = pd.DataFrame(rows, columns=GRID_COLUMNS)
    if best is None:
        logger.warning("all %d grid cells failed", len(cells))
        return GridResult(table, None, None)
    return GridResult(table, best.model, best.log)
