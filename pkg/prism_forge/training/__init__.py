"""学習ループ・グリッド探索・モデル保存"""

from .grid import GRID_COLUMNS, GridResult, grid_search, run_parallel
from .persistence import ModelArtifacts, load_model, read_epoch_log, save_model, write_epoch_log
from .trainer import (
    EPOCH_LOG_COLUMNS,
    EpochLog,
    EpochRecord,
    TrainConfig,
    TrainedModel,
    epochs_to_convergence,
    initial_tables,
    train,
)

__all__ = [
    "EPOCH_LOG_COLUMNS",
    "GRID_COLUMNS",
    "EpochLog",
    "EpochRecord",
    "GridResult",
    "ModelArtifacts",
    "TrainConfig",
    "TrainedModel",
    "epochs_to_convergence",
    "grid_search",
    "initial_tables",
    "load_model",
    "read_epoch_log",
    "run_parallel",
    "save_model",
    "train",
    "write_epoch_log",
]
