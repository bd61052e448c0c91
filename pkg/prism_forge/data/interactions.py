"""
暗黙的フィードバックのインタラクションデータ

読み込み・分割・バッチサンプリング・人気度統計・層別化を扱う。
エッジは (users, items) の2本のint64配列で保持し、密行列は作らない。
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from ..config.settings import NEUTRAL_CUMULATIVE_FRACTION, POPULAR_FRACTION, STRATA
from ..exceptions import ConfigError, DataFormatError, DegenerateInputError, EmptyDataError
from ..utils.file_manager import FileManager

logger = logging.getLogger(__name__)

ProbabilityLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class IdMaps:
    """生ID ↔ 連番インデックスの対応表"""

    user_ids: Tuple[str, ...]
    item_ids: Tuple[str, ...]

    def user_index(self) -> Dict[str, int]:
        return {raw: idx for idx, raw in enumerate(self.user_ids)}

    def item_index(self) -> Dict[str, int]:
        return {raw: idx for idx, raw in enumerate(self.item_ids)}


@dataclass(frozen=True)
class InteractionSet:
    """重複のないユーザー・アイテムのインタラクション集合

    分割後のビューは親と同じID空間 (n_users, n_items, id_maps) を共有する。
    """

    n_users: int
    n_items: int
    users: np.ndarray
    items: np.ndarray
    id_maps: IdMaps = field(repr=False)

    def __len__(self) -> int:
        return int(self.users.shape[0])

    @property
    def edges(self) -> np.ndarray:
        """(|E|, 2) のエッジ配列"""
        return np.stack([self.users, self.items], axis=1)

    def subset(self, index: np.ndarray) -> "InteractionSet":
        """指定したエッジだけを持つビューを作成"""
        return InteractionSet(
            n_users=self.n_users,
            n_items=self.n_items,
            users=self.users[index],
            items=self.items[index],
            id_maps=self.id_maps,
        )

    def union(self, other: "InteractionSet") -> "InteractionSet":
        """同じID空間の2つのビューを結合 (重複は除く)"""
        if (self.n_users, self.n_items) != (other.n_users, other.n_items):
            raise ConfigError("ID空間が異なるインタラクション集合は結合できません")
        users = np.concatenate([self.users, other.users])
        items = np.concatenate([self.items, other.items])
        keys = users * np.int64(self.n_items) + items
        _, first = np.unique(keys, return_index=True)
        first.sort()
        return InteractionSet(self.n_users, self.n_items, users[first], items[first], self.id_maps)

    def to_csr(self) -> sparse.csr_matrix:
        """ユーザー×アイテムの0/1疎行列"""
        data = np.ones(len(self), dtype=np.float64)
        return sparse.csr_matrix(
            (data, (self.users, self.items)), shape=(self.n_users, self.n_items)
        )


@dataclass(frozen=True)
class PopularityIndex:
    """学習分割から数えた次数 (d_i と N(u))"""

    degree: np.ndarray
    user_degree: np.ndarray

    @property
    def n_items(self) -> int:
        return int(self.degree.shape[0])


@dataclass(frozen=True)
class StrataAssignment:
    """アイテムごとの人気度層ラベル (0=popular, 1=neutral, 2=unpopular)"""

    labels: np.ndarray

    def mask(self, stratum: str) -> np.ndarray:
        return self.labels == STRATA.index(stratum)

    def counts(self) -> Dict[str, int]:
        return {name: int(np.sum(self.labels == code)) for code, name in enumerate(STRATA)}

    def names(self) -> List[str]:
        return [STRATA[code] for code in self.labels]


@dataclass(frozen=True)
class Batch:
    """正例ペアと正例ごとのγ個の負例"""

    users: np.ndarray
    items: np.ndarray
    negatives: np.ndarray

    def __len__(self) -> int:
        return int(self.users.shape[0])

    @property
    def gamma(self) -> int:
        return int(self.negatives.shape[1]) if self.negatives.ndim == 2 else 0

    def touched_users(self) -> np.ndarray:
        return np.unique(self.users)

    def touched_items(self) -> np.ndarray:
        return np.unique(np.concatenate([self.items, self.negatives.ravel()]))


def load_interactions(
    path: Union[str, Path],
    delimiter: Optional[str] = "\t",
    value_column: Optional[int] = None,
    min_value: Optional[float] = None,
    id_map_dir: Optional[Union[str, Path]] = None,
    persist_id_maps: bool = True,
) -> InteractionSet:
    """インタラクションファイルを読み込み、重複を除いて連番IDを振る

    各行の先頭2フィールドが生ユーザーID・生アイテムID。`#` で始まる行と
    空行は読み飛ばす。`delimiter=None` は任意の空白で区切る。
    `value_column` と `min_value` を指定すると、その列の数値が
    `min_value` 未満の行を取り除く (値そのものは保持しない)。
    """
    path = Path(path)
    try:
        text = FileManager.read_file(path)
    except (OSError, UnicodeDecodeError) as e:
        raise DataFormatError(f"ファイルを読み込めません: {path} ({e})") from e

    user_lookup: Dict[str, int] = {}
    item_lookup: Dict[str, int] = {}
    seen = set()
    users: List[int] = []
    items: List[int] = []
    skipped = 0

    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in (line.split(delimiter) if delimiter else line.split())]
        if len(fields) < 2 or not fields[0] or not fields[1]:
            raise DataFormatError("ユーザーIDとアイテムIDの2フィールドが必要です", line_number)

        if value_column is not None and min_value is not None:
            if value_column >= len(fields):
                raise DataFormatError(f"値の列 {value_column} がありません", line_number)
            try:
                value = float(fields[value_column])
            except ValueError as e:
                raise DataFormatError(f"数値ではありません: {fields[value_column]!r}", line_number) from e
            if value < min_value:
                skipped += 1
                continue

        u = user_lookup.setdefault(fields[0], len(user_lookup))
        i = item_lookup.setdefault(fields[1], len(item_lookup))
        if (u, i) in seen:
            continue
        seen.add((u, i))
        users.append(u)
        items.append(i)

    if not users:
        raise EmptyDataError(f"zero interactions: {path}")

    logger.info(
        "%s: %d users, %d items, %d interactions (%d filtered)",
        path.name, len(user_lookup), len(item_lookup), len(users), skipped,
    )

    interactions = InteractionSet(
        n_users=len(user_lookup),
        n_items=len(item_lookup),
        users=np.asarray(users, dtype=np.int64),
        items=np.asarray(items, dtype=np.int64),
        id_maps=IdMaps(tuple(user_lookup), tuple(item_lookup)),
    )
    if persist_id_maps:
        target = Path(id_map_dir) if id_map_dir is not None else path.parent
        try:
            save_id_maps(interactions, target, path.stem)
        except OSError as e:
            logger.warning("IDマップを保存できませんでした: %s", e)
    return interactions


def save_id_maps(interactions: InteractionSet, directory: Union[str, Path], stem: str) -> Tuple[Path, Path]:
    """`<stem>.users.map` / `<stem>.items.map` を書き出す (生ID, 連番)"""
    directory = Path(directory)
    paths = (directory / f"{stem}.users.map", directory / f"{stem}.items.map")
    for target, raw_ids in zip(paths, (interactions.id_maps.user_ids, interactions.id_maps.item_ids)):
        FileManager.write_file(target, "".join(f"{raw}\t{idx}\n" for idx, raw in enumerate(raw_ids)))
    return paths


def load_id_maps(directory: Union[str, Path], stem: str) -> IdMaps:
    """`save_id_maps` で書いた対応表を読み込む"""
    directory = Path(directory)

    def _read(target: Path) -> Tuple[str, ...]:
        rows = []
        for line_number, line in enumerate(FileManager.read_file(target).splitlines(), start=1):
            raw, sep, idx = line.rpartition("\t")
            if not sep or not idx.isdigit() or int(idx) != len(rows):
                raise DataFormatError(f"IDマップが不正です: {target}", line_number)
            rows.append(raw)
        return tuple(rows)

    return IdMaps(_read(directory / f"{stem}.users.map"), _read(directory / f"{stem}.items.map"))


def split(
    interactions: InteractionSet, ratios: Sequence[float], seed: int
) -> Tuple[InteractionSet, InteractionSet, InteractionSet]:
    """エッジを一様ランダムに train/val/test へ分割

    train と val は floor(ratio·|E|) 本、残りはすべて test。
    """
    if len(ratios) != 3:
        raise ConfigError("dataset.split には3つの比率が必要です")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"dataset.split に負の比率があります: {list(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"dataset.split の合計が1ではありません: {sum(ratios)}")

    n_edges = len(interactions)
    order = np.random.default_rng(seed).permutation(n_edges)
    n_train = math.floor(ratios[0] * n_edges + 1e-9)
    n_val = min(math.floor(ratios[1] * n_edges + 1e-9), n_edges - n_train)

    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    train, val, test = (interactions.subset(np.sort(p)) for p in parts)
    return train, val, test


def item_popularity(train: InteractionSet) -> PopularityIndex:
    """学習分割のアイテム次数とユーザー次数"""
    if len(train) == 0:
        raise EmptyDataError("学習分割が空です")
    return PopularityIndex(
        degree=np.bincount(train.items, minlength=train.n_items).astype(np.int64),
        user_degree=np.bincount(train.users, minlength=train.n_users).astype(np.int64),
    )


def stratify(popularity: PopularityIndex) -> StrataAssignment:
    """次数の降順 (同順位はインデックス昇順) で popular/neutral/unpopular に分ける"""
    m = popularity.n_items
    if m < 1:
        raise DegenerateInputError("アイテムが1つもありません")
    order = np.lexsort((np.arange(m), -popularity.degree))
    n_popular = math.ceil(round(POPULAR_FRACTION * m, 9))
    n_cumulative = max(n_popular, math.ceil(round(NEUTRAL_CUMULATIVE_FRACTION * m, 9)))

    labels = np.full(m, STRATA.index("unpopular"), dtype=np.int8)
    labels[order[:n_popular]] = STRATA.index("popular")
    labels[order[n_popular:n_cumulative]] = STRATA.index("neutral")
    return StrataAssignment(labels)


def _draw_negatives(n_items: int, n_positives: int, gamma: int, rng: np.random.Generator) -> np.ndarray:
    # 全アイテムから復元抽出 (偽陰性を許す近似負例サンプリング)
    if gamma == 0:
        return np.empty((n_positives, 0), dtype=np.int64)
    return rng.integers(0, n_items, size=(n_positives, gamma), dtype=np.int64)


def sample_batch(
    train: InteractionSet, batch_size: int, gamma: int, rng: np.random.Generator
) -> Batch:
    """学習エッジから非復元で1バッチを抽出"""
    if batch_size < 1 or gamma < 0:
        raise ConfigError("batch_size >= 1 かつ gamma >= 0 が必要です")
    size = min(batch_size, len(train))
    index = rng.choice(len(train), size=size, replace=False)
    return Batch(train.users[index], train.items[index], _draw_negatives(train.n_items, size, gamma, rng))


class EpochSampler:
    """1エポック = 学習エッジをシャッフルして連続バッチで1周する"""

    def __init__(self, train: InteractionSet, batch_size: int, gamma: int, rng: np.random.Generator):
        if batch_size < 1 or gamma < 0:
            raise ConfigError("batch_size >= 1 かつ gamma >= 0 が必要です")
        if len(train) == 0:
            raise EmptyDataError("学習分割が空です")
        self.train = train
        self.batch_size = batch_size
        self.gamma = gamma
        self.rng = rng

    @property
    def n_batches(self) -> int:
        return math.ceil(len(self.train) / self.batch_size)

    def batches(self) -> Iterator[Batch]:
        order = self.rng.permutation(len(self.train))
        for start in range(0, len(order), self.batch_size):
            index = order[start:start + self.batch_size]
            yield Batch(
                self.train.users[index],
                self.train.items[index],
                _draw_negatives(self.train.n_items, len(index), self.gamma, self.rng),
            )


def _scalar_or_array(values: np.ndarray) -> ProbabilityLike:
    return float(values) if values.ndim == 0 else values


def _log_absent(d_i: ProbabilityLike, batch_size: float, total_edges: float) -> np.ndarray:
    """log P(i ∉ B) = d_i · log(1 − |B|/|E|)"""
    if total_edges <= 0:
        raise DegenerateInputError("total_edges は正である必要があります")
    if not 0 <= batch_size <= total_edges:
        raise DegenerateInputError("0 <= batch_size <= total_edges が必要です")
    degree = np.asarray(d_i, dtype=np.float64)
    if np.any(degree < 0):
        raise DegenerateInputError("次数は0以上である必要があります")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_absent = degree * np.log1p(-batch_size / total_edges)
    return np.where(degree == 0, 0.0, log_absent)


def batch_inclusion_probability(d_i: ProbabilityLike, batch_size: float, total_edges: float) -> ProbabilityLike:
    """P(i ∈ B) = 1 − (1 − |B|/|E|)^{d_i}"""
    return _scalar_or_array(-np.expm1(_log_absent(d_i, batch_size, total_edges)))


def negsample_inclusion_probability(
    d_i: ProbabilityLike, batch_size: float, total_edges: float, gamma: int, n_items: float
) -> ProbabilityLike:
    """負例サンプリング込みの P(i ∈ B) = 1 − (1 − |B|/|E|)^{d_i}·(1 − γ|B|/|I|)"""
    if n_items <= 0:
        raise DegenerateInputError("n_items は正である必要があります")
    q = gamma * batch_size / n_items
    if q > 1:
        logger.warning("γ|B| = %g > |I| = %g: 独立近似が成り立たないため1で打ち切ります", gamma * batch_size, n_items)
        q = 1.0
    log_absent = _log_absent(d_i, batch_size, total_edges)
    # (1 − a) + a·q の形なら γ=0 で batch_inclusion_probability と完全に一致する
    return _scalar_or_array(-np.expm1(log_absent) + np.exp(log_absent) * q)


def generate_synthetic(
    n_users: int, n_items: int, n_edges: int, popularity_exponent: float, seed: int
) -> InteractionSet:
    """べき乗則の人気度を持つ合成インタラクション集合

    アイテムは rank^(−exponent) に比例 (アイテム0が最も人気)、ユーザーは一様。
    重複ペアを除きながら n_edges 本に達するまで抽出する。
    """
    if n_users < 1 or n_items < 1 or n_edges < 1:
        raise ConfigError("n_users, n_items, n_edges は正である必要があります")
    if n_edges > n_users * n_items:
        raise DegenerateInputError(f"n_edges={n_edges} は n_users·n_items={n_users * n_items} を超えています")

    rng = np.random.default_rng(seed)
    weights = np.arange(1, n_items + 1, dtype=np.float64) ** (-popularity_exponent)
    weights /= weights.sum()

    keys = np.empty(0, dtype=np.int64)
    rounds = 0
    while keys.shape[0] < n_edges:
        needed = n_edges - keys.shape[0]
        users = rng.integers(0, n_users, size=2 * needed + 16, dtype=np.int64)
        items = rng.choice(n_items, size=users.shape[0], p=weights)
        candidates = np.concatenate([keys, users * n_items + items])
        _, first = np.unique(candidates, return_index=True)
        keys = candidates[np.sort(first)][:n_edges]
        rounds += 1
    logger.debug("synthetic: %d edges in %d rounds", n_edges, rounds)

    return InteractionSet(
        n_users=n_users,
        n_items=n_items,
        users=keys // n_items,
        items=keys % n_items,
        id_maps=IdMaps(
            tuple(f"u{u}" for u in range(n_users)),
            tuple(f"i{i}" for i in range(n_items)),
        ),
    )


def write_interactions(interactions: InteractionSet, path: Union[str, Path], delimiter: str = "\t") -> None:
    """生IDでインタラクションファイルを書き出す (load_interactions で読み戻せる形式)"""
    user_ids = interactions.id_maps.user_ids
    item_ids = interactions.id_maps.item_ids
    lines = (
        f"{user_ids[u]}{delimiter}{item_ids[i]}\n"
        for u, i in zip(interactions.users.tolist(), interactions.items.tolist())
    )
    FileManager.write_file(path, "".join(lines))


@dataclass(frozen=True)
class SplitData:
    """train/val/test と、train から計算した人気度・層"""

    train: InteractionSet
    val: InteractionSet
    test: InteractionSet
    popularity: PopularityIndex
    strata: StrataAssignment

    @classmethod
    def from_splits(cls, train: InteractionSet, val: InteractionSet, test: InteractionSet) -> "SplitData":
        popularity = item_popularity(train)
        return cls(train, val, test, popularity, stratify(popularity))

    @property
    def n_users(self) -> int:
        return self.train.n_users

    @property
    def n_items(self) -> int:
        return self.train.n_items


def prepare_splits(interactions: InteractionSet, ratios: Sequence[float], seed: int) -> SplitData:
    """分割して人気度と層を計算"""
    return SplitData.from_splits(*split(interactions, ratios, seed))
