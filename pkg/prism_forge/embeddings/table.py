"""
埋め込みテーブルと初期化 (Xavier一様 / PRISM)

テーブルファイル形式 (リトルエンディアン):
    b"PRSM" | u8 version=1 | u8 endianness=0 | 2バイト予約 | u64 rows | u64 dim
    に続いて rows·dim 個の float64 (行優先)
"""

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..config.settings import SUPPORTED_INIT_STRATEGIES, SUPPORTED_INIT_TARGETS
from ..exceptions import ConfigError, DegenerateInputError, EmbeddingFormatError
from ..utils.file_manager import FileManager

logger = logging.getLogger(__name__)

TABLE_MAGIC = b"PRSM"
TABLE_VERSION = 1
TABLE_HEADER = struct.Struct("<4sBB2xQQ")
TABLE_HEADER_SIZE = TABLE_HEADER.size  # 24


@dataclass
class EmbeddingTable:
    """行 = エンティティ、列 = 潜在次元の密行列 (float64)"""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise DegenerateInputError(f"埋め込みテーブルの形が不正です: {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DegenerateInputError("埋め込みテーブルに有限でない値があります")

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.values.copy())


@dataclass(frozen=True)
class InitSpec:
    """初期化の指定。alpha は PRISM のエンコード強度 α ∈ [0, 1]"""

    strategy: str = "xavier_uniform"
    alpha: float = 1.0
    apply_to: str = "both"
    log_base: str = "e"

    def __post_init__(self) -> None:
        if self.strategy not in SUPPORTED_INIT_STRATEGIES:
            raise ConfigError(f"train.init.strategy が不正です: {self.strategy}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"train.init.alpha は [0, 1] の範囲が必要です: {self.alpha}")
        if self.apply_to not in SUPPORTED_INIT_TARGETS:
            raise ConfigError(f"train.init.apply_to が不正です: {self.apply_to}")
        log_scale(self.log_base)


def log_scale(log_base: str) -> float:
    """log_base を自然対数への換算係数に変換 ("e" は1)"""
    if log_base == "e":
        return 1.0
    try:
        base = float(log_base)
    except ValueError as e:
        raise ConfigError(f"train.init.log_base が不正です: {log_base}") from e
    if base <= 0 or base == 1:
        raise ConfigError(f"train.init.log_base が不正です: {log_base}")
    return 1.0 / math.log(base)


def init_xavier(rows: int, dim: int, rng: Union[int, np.random.Generator]) -> EmbeddingTable:
    """Xavier一様初期化: U(−b, b), b = sqrt(6 / (rows + dim))"""
    if rows < 1 or dim < 1:
        raise ConfigError(f"rows, dim は1以上が必要です: ({rows}, {dim})")
    generator = np.random.default_rng(rng)
    bound = math.sqrt(6.0 / (rows + dim))
    return EmbeddingTable(generator.uniform(-bound, bound, size=(rows, dim)))


def magnitudes(table: Union[EmbeddingTable, np.ndarray]) -> np.ndarray:
    """行ごとのL2ノルム"""
    values = table.values if isinstance(table, EmbeddingTable) else np.asarray(table, dtype=np.float64)
    return np.linalg.norm(values, axis=1)


def prism_target_magnitude(degree: np.ndarray, alpha: float, log_base: str = "e") -> np.ndarray:
    """PRISMの目標ノルム α·log(d + 2) + (1 − α)"""
    degree = np.asarray(degree, dtype=np.float64)
    return alpha * np.log(degree + 2.0) * log_scale(log_base) + (1.0 - alpha)


def prism_init(
    base: EmbeddingTable, degree: np.ndarray, alpha: float, log_base: str = "e"
) -> EmbeddingTable:
    """各行を単位ベクトルに正規化し、人気度に応じたノルムへスケールする

    行の向きは変わらない。α=0 ならすべての行のノルムは1。
    """
    degree = np.asarray(degree)
    if degree.shape != (base.rows,):
        raise ConfigError(f"次数ベクトルの長さ {degree.shape} がテーブル行数 {base.rows} と一致しません")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"train.init.alpha は [0, 1] の範囲が必要です: {alpha}")

    norms = magnitudes(base)
    zero_rows = np.flatnonzero(norms == 0)
    if zero_rows.size:
        raise DegenerateInputError(f"ノルム0の行は正規化できません: {zero_rows[:5].tolist()}")

    scale = prism_target_magnitude(degree, alpha, log_base)
    return EmbeddingTable(base.values / norms[:, None] * scale[:, None])


def initialize_tables(
    spec: InitSpec,
    n_users: int,
    n_items: int,
    dim: int,
    user_degree: Optional[np.ndarray],
    item_degree: Optional[np.ndarray],
    seed_sequence: np.random.SeedSequence,
) -> Tuple[EmbeddingTable, EmbeddingTable]:
    """ユーザー・アイテムの両テーブルを初期化"""
    user_seed, item_seed = seed_sequence.spawn(2)
    users = init_xavier(n_users, dim, np.random.default_rng(user_seed))
    items = init_xavier(n_items, dim, np.random.default_rng(item_seed))
    if spec.strategy != "prism":
        return users, items

    if spec.apply_to in ("users", "both"):
        if user_degree is None:
            raise ConfigError("PRISMのユーザー適用にはユーザー次数が必要です")
        users = prism_init(users, user_degree, spec.alpha, spec.log_base)
    if spec.apply_to in ("items", "both"):
        if item_degree is None:
            raise ConfigError("PRISMのアイテム適用にはアイテム次数が必要です")
        items = prism_init(items, item_degree, spec.alpha, spec.log_base)
    logger.debug("PRISM init: alpha=%s apply_to=%s", spec.alpha, spec.apply_to)
    return users, items


def encode_table(table: EmbeddingTable) -> bytes:
    header = TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, 0, table.rows, table.dim)
    return header + table.values.astype("<f8", copy=False).tobytes(order="C")


def decode_table(content: bytes, source: str = "<bytes>") -> EmbeddingTable:
    if len(content) < TABLE_HEADER_SIZE:
        raise EmbeddingFormatError(f"{source}: ヘッダーが途中で切れています ({len(content)} バイト)")
    magic, version, endianness, rows, dim = TABLE_HEADER.unpack_from(content)
    if magic != TABLE_MAGIC:
        raise EmbeddingFormatError(f"{source}: マジックバイトが不正です: {magic!r}")
    if version != TABLE_VERSION:
        raise EmbeddingFormatError(f"{source}: 未対応のバージョンです: {version}")
    if endianness != 0:
        raise EmbeddingFormatError(f"{source}: リトルエンディアン以外には未対応です")
    expected = TABLE_HEADER_SIZE + rows * dim * 8
    if len(content) != expected:
        raise EmbeddingFormatError(
            f"{source}: 長さが一致しません (期待値 {expected} バイト, 実際 {len(content)} バイト)"
        )
    values = np.frombuffer(content, dtype="<f8", offset=TABLE_HEADER_SIZE).reshape(rows, dim)
    return EmbeddingTable(values.astype(np.float64))


def dump_table(table: EmbeddingTable, path: Union[str, Path]) -> None:
    """テーブルをビット完全に書き出す"""
    FileManager.write_bytes(path, encode_table(table))


def load_table(path: Union[str, Path]) -> EmbeddingTable:
    """`dump_table` で書いたテーブルを読み込む"""
    try:
        content = FileManager.read_bytes(path)
    except OSError as e:
        raise EmbeddingFormatError(f"テーブルファイルを読み込めません: {path} ({e})") from e
    return decode_table(content, str(path))
