"""
ミニバッチSGDによる学習ループ

1ステップ: 勾配を現在のパラメータで計算 → 重み減衰 (1 − ηλ) → 勾配を引く。
全行減衰では i ← i(1 − ηλ) − η∇ となり、減衰とランキング勾配が同じ点で評価される。
"""

import hashlib
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from ..config.settings import STRATA, SUPPORTED_NDCG_WINDOWS
from ..data.interactions import Batch, EpochSampler, SplitData
from ..embeddings.table import EmbeddingTable, InitSpec, initialize_tables, magnitudes
from ..evaluation.evaluator import ScorerConfig, evaluate_split
from ..exceptions import ConfigError, DivergenceError
from ..losses.base import LossSpec, MarginTable
from ..losses.decay import apply_weight_decay, decay_factor
from ..losses.mawu import clamp_margins
from ..losses.registry import compute_loss

logger = logging.getLogger(__name__)

EPOCH_LOG_COLUMNS = [
    "epoch",
    "train_loss",
    "val_ndcg_dot",
    "val_ndcg_cos",
    "mag_popular",
    "mag_neutral",
    "mag_unpopular",
    "seconds",
]

# 一様性の項はバッチ内に2つ以上のエンティティを必要とする
UNIFORMITY_LOSSES = ("DirectAU", "MAWU")


@dataclass(frozen=True)
class TrainConfig:
    """学習ループの設定

    max_epochs=0 は初期化をそのまま返す (CLIからは1以上のみ受け付ける)。
    """

    loss: LossSpec = field(default_factory=LossSpec)
    init: InitSpec = field(default_factory=InitSpec)
    dim: int = 64
    learning_rate: float = 0.01
    batch_size: int = 4096
    max_epochs: int = 1000
    patience: int = 10
    eval_k: int = 20
    window: str = "user"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError(f"train.learning_rate は正である必要があります: {self.learning_rate}")
        if self.max_epochs < 0:
            raise ConfigError(f"train.max_epochs は0以上が必要です: {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"train.patience は1以上が必要です: {self.patience}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size は1以上が必要です: {self.batch_size}")
        if self.dim < 1:
            raise ConfigError(f"train.dim は1以上が必要です: {self.dim}")
        if self.eval_k < 1:
            raise ConfigError(f"train.eval_k は1以上が必要です: {self.eval_k}")
        if self.window not in SUPPORTED_NDCG_WINDOWS:
            raise ConfigError(f"train.window が不正です: {self.window}")
        try:
            decay_factor(self.learning_rate, self.loss.decay.lam)
        except ConfigError as e:
            raise ConfigError(f"train.decay.lambda: {e}") from e

    def evolve(self, **changes: Any) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """正規化したYAMLのSHA-256"""
        canonical = yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_ndcg_dot: float
    val_ndcg_cos: float
    mag_popular: float
    mag_neutral: float
    mag_unpopular: float
    seconds: float


@dataclass
class EpochLog:
    """完了したエポックごとに1レコード"""

    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    @property
    def best_epoch(self) -> int:
        """検証NDCG (内積) が最大のエポック (同点は早い方、空なら0)"""
        if not self.records:
            return 0
        scores = np.array([r.val_ndcg_dot for r in self.records], dtype=np.float64)
        if np.all(np.isnan(scores)):
            return self.records[-1].epoch
        return self.records[int(np.nanargmax(scores))].epoch

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=EPOCH_LOG_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "EpochLog":
        missing = [c for c in EPOCH_LOG_COLUMNS if c not in frame.columns]
        if missing:
            raise ConfigError(f"エポックログに列がありません: {', '.join(missing)}")
        records = [
            EpochRecord(epoch=int(row["epoch"]), **{c: float(row[c]) for c in EPOCH_LOG_COLUMNS[1:]})
            for _, row in frame.iterrows()
        ]
        return cls(records)


@dataclass
class TrainedModel:
    """最終パラメータと、検証NDCGが最良だったエポックのスナップショット"""

    users: EmbeddingTable
    items: EmbeddingTable
    best_users: EmbeddingTable
    best_items: EmbeddingTable
    config: TrainConfig
    best_epoch: int
    epochs_run: int
    margins: Optional[MarginTable] = None
    best_margins: Optional[MarginTable] = None

    def provenance(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config.config_hash(),
            "seed": self.config.seed,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "loss": self.config.loss.kind,
            "decay_mode": self.config.loss.decay.mode,
            "lambda": repr(self.config.loss.decay.lam),
            "init": self.config.init.strategy,
            "alpha": repr(self.config.init.alpha),
            "learning_rate": repr(self.config.learning_rate),
            "dim": self.config.dim,
        }


def initial_tables(
    config: TrainConfig, data: SplitData, seed_sequence: Optional[np.random.SeedSequence] = None
) -> Tuple[EmbeddingTable, EmbeddingTable]:
    """学習開始時のテーブル (seed_sequence 省略時は train と同じ系列)"""
    if seed_sequence is None:
        seed_sequence = np.random.SeedSequence(config.seed).spawn(2)[0]
    return initialize_tables(
        config.init,
        data.n_users,
        data.n_items,
        config.dim,
        data.popularity.user_degree,
        data.popularity.degree,
        seed_sequence,
    )


def _is_degenerate(kind: str, batch: Batch) -> bool:
    if kind not in UNIFORMITY_LOSSES:
        return False
    return np.unique(batch.users).shape[0] < 2 or np.unique(batch.items).shape[0] < 2


def _stratum_magnitudes(items: np.ndarray, data: SplitData) -> Dict[str, float]:
    norms = magnitudes(items)
    out = {}
    for name in STRATA:
        mask = data.strata.mask(name)
        out[name] = float(norms[mask].mean()) if mask.any() else float("nan")
    return out


def _validate(users: np.ndarray, items: np.ndarray, data: SplitData, config: TrainConfig) -> Dict[str, float]:
    if len(data.val) == 0:
        return {"dot": float("nan"), "cosine": float("nan")}
    scores = {}
    for similarity in ("dot", "cosine"):
        scorer = ScorerConfig(similarity, config.eval_k, config.window)
        scores[similarity] = evaluate_split(users, items, data, scorer, "val").ndcg_overall
    return scores


def _decay_step(config: TrainConfig, batch: Batch, users: np.ndarray, items: np.ndarray) -> None:
    decay = config.loss.decay
    apply_weight_decay(users, items, config.learning_rate, decay.lam, decay.mode, batch)


def _sgd_step(
    config: TrainConfig,
    batch: Batch,
    users: np.ndarray,
    items: np.ndarray,
    margins: Optional[MarginTable],
) -> float:
    eta = config.learning_rate
    loss, grads = compute_loss(config.loss, batch, users, items, margins)
    if not math.isfinite(loss) or not grads.is_finite():
        raise DivergenceError(f"損失または勾配が有限ではありません (loss={loss})")

    _decay_step(config, batch, users, items)
    # インデックスは重複なし (合算済み)
    users[grads.user_index] -= eta * grads.user_grad
    items[grads.item_index] -= eta * grads.item_grad

    if margins is not None:
        if grads.user_margin_grad is not None:
            margins.user[grads.user_index] -= eta * grads.user_margin_grad
        if grads.item_margin_grad is not None:
            margins.item[grads.item_index] -= eta * grads.item_margin_grad
        clamp_margins(margins)
    return float(loss)


def train(
    config: TrainConfig,
    data: SplitData,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> Tuple[TrainedModel, EpochLog]:
    """学習分割でSGDを回し、検証NDCGで早期終了する

    検証NDCG (内積) が `patience` エポック連続で改善しなければ止める。
    """
    if len(data.train) == 0:
        raise ConfigError("学習分割が空です")

    init_seed, sampler_seed = np.random.SeedSequence(config.seed).spawn(2)
    user_table, item_table = initial_tables(config, data, init_seed)
    users = user_table.values.copy()
    items = item_table.values.copy()
    margins = MarginTable.zeros(data.n_users, data.n_items) if config.loss.kind == "MAWU" else None

    sampler = EpochSampler(
        data.train, config.batch_size, config.loss.negatives_per_positive, np.random.default_rng(sampler_seed)
    )
    log = EpochLog()
    best_users, best_items = users.copy(), items.copy()
    best_margins = margins.copy() if margins is not None else None
    best_score = -math.inf
    best_epoch = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        total = 0.0
        for batch in sampler.batches():
            if _is_degenerate(config.loss.kind, batch):
                # 損失だけ飛ばし、減衰は毎ステップかける
                logger.debug("epoch %d: エンティティが2未満のバッチは減衰のみ", epoch)
                _decay_step(config, batch, users, items)
                continue
            try:
                total += _sgd_step(config, batch, users, items, margins)
            except DivergenceError as e:
                raise DivergenceError(f"epoch {epoch}: {e}") from e
        if not (np.all(np.isfinite(users)) and np.all(np.isfinite(items))):
            raise DivergenceError(f"epoch {epoch}: 埋め込みが有限ではなくなりました (学習率を下げてください)")

        scores = _validate(users, items, data, config)
        mags = _stratum_magnitudes(items, data)
        record = EpochRecord(
            epoch=epoch,
            train_loss=total,
            val_ndcg_dot=scores["dot"],
            val_ndcg_cos=scores["cosine"],
            mag_popular=mags["popular"],
            mag_neutral=mags["neutral"],
            mag_unpopular=mags["unpopular"],
            seconds=time.perf_counter() - started,
        )
        log.append(record)
        if on_epoch is not None:
            on_epoch(record)
        logger.debug(
            "epoch %d: loss=%.6g ndcg_dot=%.6g ndcg_cos=%.6g", epoch, total, scores["dot"], scores["cosine"]
        )

        # 検証分割が空なら最後のエポックを最良とする
        if math.isnan(scores["dot"]) or scores["dot"] > best_score:
            best_score = scores["dot"] if not math.isnan(scores["dot"]) else best_score
            best_epoch = epoch
            best_users, best_items = users.copy(), items.copy()
            best_margins = margins.copy() if margins is not None else None
        elif epoch - best_epoch >= config.patience:
            logger.info("early stopping at epoch %d (best %d)", epoch, best_epoch)
            break

    model = TrainedModel(
        users=EmbeddingTable(users),
        items=EmbeddingTable(items),
        best_users=EmbeddingTable(best_users),
        best_items=EmbeddingTable(best_items),
        config=config,
        best_epoch=best_epoch,
        epochs_run=len(log),
        margins=margins,
        best_margins=best_margins,
    )
    return model, log


def epochs_to_convergence(log: EpochLog) -> int:
    """検証NDCGが最良だったエポック番号 (早期終了エポック − patience)"""
    return log.best_epoch
