"""
学習済みモデルとエポックログの保存・読み込み

モデルディレクトリ:
    users.prsm / items.prsm   最終テーブル
    margins.csv               MAWUのみ (entity, index, margin)
    best/                     最良エポックのテーブル (同じ構成)
    provenance.txt            `key = value` 形式の来歴
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from ..config.settings import (
    MODEL_BEST_DIR,
    MODEL_ITEMS_FILE,
    MODEL_MARGINS_FILE,
    MODEL_PROVENANCE_FILE,
    MODEL_USERS_FILE,
)
from ..embeddings.table import EmbeddingTable, dump_table, load_table
from ..exceptions import EmbeddingFormatError
from ..losses.base import MarginTable
from ..utils.file_manager import FileManager
from .trainer import EPOCH_LOG_COLUMNS, EpochLog, TrainedModel

logger = logging.getLogger(__name__)

MARGIN_COLUMNS = ["entity", "index", "margin"]


@dataclass
class ModelArtifacts:
    """ディレクトリから読み込んだテーブル一式"""

    users: EmbeddingTable
    items: EmbeddingTable
    margins: Optional[MarginTable]
    provenance: Dict[str, str]


def _write_margins(path: Path, margins: MarginTable) -> None:
    frame = pd.DataFrame(
        {
            "entity": ["user"] * margins.user.shape[0] + ["item"] * margins.item.shape[0],
            "index": np.concatenate([np.arange(margins.user.shape[0]), np.arange(margins.item.shape[0])]),
            "margin": np.concatenate([margins.user, margins.item]),
        }
    )
    FileManager.write_csv(path, frame, MARGIN_COLUMNS)


def _read_margins(path: Path) -> MarginTable:
    frame = FileManager.read_csv(path)
    users = frame[frame["entity"] == "user"].sort_values("index")["margin"].to_numpy(dtype=np.float64)
    items = frame[frame["entity"] == "item"].sort_values("index")["margin"].to_numpy(dtype=np.float64)
    return MarginTable(users, items)


def _write_tables(
    directory: Path, users: EmbeddingTable, items: EmbeddingTable, margins: Optional[MarginTable]
) -> None:
    dump_table(users, directory / MODEL_USERS_FILE)
    dump_table(items, directory / MODEL_ITEMS_FILE)
    if margins is not None:
        _write_margins(directory / MODEL_MARGINS_FILE, margins)


def save_model(
    model: TrainedModel, directory: Union[str, Path], extra: Optional[Dict[str, object]] = None
) -> Path:
    """モデルディレクトリを書き出す (extra は来歴に追記)"""
    directory = Path(directory)
    FileManager.ensure_directory_exists(directory)
    _write_tables(directory, model.users, model.items, model.margins)
    _write_tables(directory / MODEL_BEST_DIR, model.best_users, model.best_items, model.best_margins)
    provenance = {**model.provenance(), **(extra or {})}
    FileManager.write_key_values(directory / MODEL_PROVENANCE_FILE, provenance)
    logger.info("saved model to %s", directory)
    return directory


def load_model(directory: Union[str, Path], best: bool = False) -> ModelArtifacts:
    """モデルディレクトリを読み込む (best=True なら最良エポックのテーブル)"""
    directory = Path(directory)
    source = directory / MODEL_BEST_DIR if best else directory
    for name in (MODEL_USERS_FILE, MODEL_ITEMS_FILE):
        if not FileManager.file_exists(source / name):
            raise EmbeddingFormatError(f"テーブルファイルがありません: {source / name}")

    users = load_table(source / MODEL_USERS_FILE)
    items = load_table(source / MODEL_ITEMS_FILE)
    if users.dim != items.dim:
        raise EmbeddingFormatError(f"ユーザーとアイテムの次元が一致しません: {users.dim} != {items.dim}")

    margins_path = source / MODEL_MARGINS_FILE
    margins = _read_margins(margins_path) if FileManager.file_exists(margins_path) else None
    provenance_path = directory / MODEL_PROVENANCE_FILE
    provenance = FileManager.read_key_values(provenance_path) if FileManager.file_exists(provenance_path) else {}
    return ModelArtifacts(users, items, margins, provenance)


def write_epoch_log(log: EpochLog, path: Union[str, Path]) -> None:
    FileManager.write_csv(path, log.to_frame(), EPOCH_LOG_COLUMNS)


def read_epoch_log(path: Union[str, Path]) -> EpochLog:
    return EpochLog.from_frame(FileManager.read_csv(path))
