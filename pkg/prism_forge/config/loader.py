"""
プロジェクト設定ファイル (.prism-forge.yml) の読み込みと検証

読み込み順: DEFAULT_CONFIG → YAMLファイル → `--set key=value` → 個別のCLIフラグ
"""

import copy
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import yaml

from ..embeddings.table import InitSpec
from ..exceptions import ConfigError
from ..losses.base import DecaySpec, LossSpec
from ..training.trainer import TrainConfig
from .settings import (
    DEFAULT_CONFIG,
    SUPPORTED_SCORERS,
    SUPPORTED_SWEEP_AXES,
)

logger = logging.getLogger(__name__)

# CLIフラグ名 → 設定キー
FLAG_KEYS: Dict[str, str] = {
    "dataset": "dataset.path",
    "loss": "train.loss.kind",
    "lam": "train.decay.lambda",
    "wd_mode": "train.decay.mode",
    "init": "train.init.strategy",
    "alpha": "train.init.alpha",
    "lr": "train.learning_rate",
    "batch_size": "train.batch_size",
    "dim": "train.dim",
    "max_epochs": "train.max_epochs",
    "seed": "train.seed",
    "seeds": "experiment.seeds",
    "jobs": "experiment.jobs",
    "out_dir": "experiment.out_dir",
}

ConfigDict = Dict[str, Any]


def _merge(base: ConfigDict, override: Mapping[str, Any], prefix: str = "") -> ConfigDict:
    """override を base に再帰的に重ねる (未知のキーはエラー)"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in merged:
            raise ConfigError(f"不明な設定キーです: {dotted}")
        if isinstance(merged[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"{dotted} はセクションです (値は指定できません)")
            merged[key] = _merge(merged[key], value, prefix=f"{dotted}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: Optional[Union[str, Path]] = None) -> ConfigDict:
    """デフォルト設定にYAMLファイルを重ねる (path が None ならデフォルトのみ)"""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"設定ファイルが見つかりません: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"設定ファイルを解析できません: {path} ({e})") from e
    if not isinstance(loaded, Mapping):
        raise ConfigError(f"設定ファイルの最上位はマッピングである必要があります: {path}")
    logger.debug("loaded config from %s", path)
    return _merge(DEFAULT_CONFIG, loaded)


def set_value(config: ConfigDict, dotted: str, value: Any) -> ConfigDict:
    """ドット区切りのキーに値を設定した新しい設定を返す"""
    override: Dict[str, Any] = {}
    node = override
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return _merge(config, override)


def apply_overrides(config: ConfigDict, assignments: Iterable[str]) -> ConfigDict:
    """`key=value` の上書きを適用 (値はYAMLのスカラーとして解釈)"""
    for assignment in assignments:
        key, sep, raw = assignment.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"上書きは key=value 形式で指定してください: {assignment!r}")
        try:
            value = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(f"{key.strip()} の値を解釈できません: {raw!r}") from e
        config = set_value(config, key.strip(), value)
    return config


def apply_flags(config: ConfigDict, flags: Mapping[str, Any]) -> ConfigDict:
    """CLIフラグを設定キーに反映 (None は未指定)

    --alpha だけを指定したときは初期化を PRISM に切り替える。
    """
    for flag, value in flags.items():
        if value is None or flag not in FLAG_KEYS:
            continue
        if isinstance(value, tuple):
            if not value:
                continue
            value = list(value)
        config = set_value(config, FLAG_KEYS[flag], value)
    if flags.get("alpha") is not None and flags.get("init") is None:
        config = set_value(config, "train.init.strategy", "prism")
    return config


def dump_config(config: ConfigDict) -> str:
    """解決済みの設定をYAMLで出力 (キー順で正規化)"""
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False, allow_unicode=True)


def config_hash(config: ConfigDict) -> str:
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SyntheticSpec:
    n_users: int = 1000
    n_items: int = 500
    n_edges: int = 20000
    exponent: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class DatasetConfig:
    """読み込むファイル (なければ合成データ) と分割の指定"""

    path: Optional[str] = None
    delimiter: Optional[str] = "\t"
    value_column: Optional[int] = None
    min_value: Optional[float] = None
    split: Sequence[float] = (0.8, 0.1, 0.1)
    split_seed: int = 0
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)


@dataclass(frozen=True)
class ExperimentConfig:
    """データセット・学習設定・スイープ軸をまとめた実験設定"""

    dataset: DatasetConfig
    train: TrainConfig
    axis: str = "none"
    values: Sequence[float] = ()
    seeds: Sequence[int] = (0,)
    scorers: Sequence[str] = ("dot", "cosine")
    jobs: int = 1
    out_dir: str = "runs"
    lr_grid: Sequence[float] = ()
    lambda_grid: Sequence[float] = ()
    gamma_grid: Sequence[float] = ()
    raw: ConfigDict = field(default_factory=dict, repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def _field(section: Mapping[str, Any], key: str, dotted: str, convert: Callable[[Any], Any]) -> Any:
    value = section[key]
    if isinstance(value, bool) and convert in (int, float):
        raise ConfigError(f"{dotted} は数値である必要があります: {value!r}")
    try:
        return convert(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{dotted} の値が不正です: {value!r}") from e


def _optional(convert: Callable[[Any], Any]) -> Callable[[Any], Any]:
    return lambda value: None if value is None else convert(value)


def _number_list(section: Mapping[str, Any], key: str, dotted: str, convert: Callable[[Any], Any] = float) -> List[Any]:
    values = section[key]
    if values is None:
        return []
    if not isinstance(values, (list, tuple)):
        values = [values]
    return [_field({key: v}, key, dotted, convert) for v in values]


def _build_dataset(section: Mapping[str, Any]) -> DatasetConfig:
    split = _number_list(section, "split", "dataset.split")
    if len(split) != 3:
        raise ConfigError(f"dataset.split は3つの比率が必要です: {split}")
    synthetic = section["synthetic"]
    spec = SyntheticSpec(
        n_users=_field(synthetic, "n_users", "dataset.synthetic.n_users", int),
        n_items=_field(synthetic, "n_items", "dataset.synthetic.n_items", int),
        n_edges=_field(synthetic, "n_edges", "dataset.synthetic.n_edges", int),
        exponent=_field(synthetic, "exponent", "dataset.synthetic.exponent", float),
        seed=_field(synthetic, "seed", "dataset.synthetic.seed", int),
    )
    for name in ("n_users", "n_items", "n_edges"):
        if getattr(spec, name) < 1:
            raise ConfigError(f"dataset.synthetic.{name} は1以上が必要です")
    if spec.exponent < 0:
        raise ConfigError(f"dataset.synthetic.exponent は0以上が必要です: {spec.exponent}")

    value_column = _field(section, "value_column", "dataset.value_column", _optional(int))
    if value_column is not None and value_column < 0:
        raise ConfigError(f"dataset.value_column は0以上が必要です: {value_column}")
    return DatasetConfig(
        path=_field(section, "path", "dataset.path", _optional(str)),
        delimiter=_field(section, "delimiter", "dataset.delimiter", _optional(str)),
        value_column=value_column,
        min_value=_field(section, "min_value", "dataset.min_value", _optional(float)),
        split=tuple(split),
        split_seed=_field(section, "split_seed", "dataset.split_seed", int),
        synthetic=spec,
    )


def _build_train(section: Mapping[str, Any]) -> TrainConfig:
    loss = section["loss"]
    decay = section["decay"]
    init = section["init"]
    decay_spec = DecaySpec(
        mode=_field(decay, "mode", "train.decay.mode", str),
        lam=_field(decay, "lambda", "train.decay.lambda", float),
    )
    loss_spec = LossSpec(
        kind=_field(loss, "kind", "train.loss.kind", str),
        gamma_uniformity=_field(loss, "gamma_uniformity", "train.loss.gamma_uniformity", float),
        gamma_user=_field(loss, "gamma_user", "train.loss.gamma_user", float),
        gamma_item=_field(loss, "gamma_item", "train.loss.gamma_item", float),
        n_negatives=_field(loss, "n_negatives", "train.loss.n_negatives", int),
        temperature=_field(loss, "temperature", "train.loss.temperature", float),
        reduction=_field(loss, "reduction", "train.loss.reduction", str),
        decay=decay_spec,
    )
    init_spec = InitSpec(
        strategy=_field(init, "strategy", "train.init.strategy", str),
        alpha=_field(init, "alpha", "train.init.alpha", float),
        apply_to=_field(init, "apply_to", "train.init.apply_to", str),
        log_base=_field(init, "log_base", "train.init.log_base", str),
    )
    config = TrainConfig(
        loss=loss_spec,
        init=init_spec,
        dim=_field(section, "dim", "train.dim", int),
        learning_rate=_field(section, "learning_rate", "train.learning_rate", float),
        batch_size=_field(section, "batch_size", "train.batch_size", int),
        max_epochs=_field(section, "max_epochs", "train.max_epochs", int),
        patience=_field(section, "patience", "train.patience", int),
        eval_k=_field(section, "eval_k", "train.eval_k", int),
        window=_field(section, "window", "train.window", str),
        seed=_field(section, "seed", "train.seed", int),
    )
    if config.max_epochs < 1:
        raise ConfigError(f"train.max_epochs は1以上が必要です: {config.max_epochs}")
    return config


def build_experiment_config(config: ConfigDict) -> ExperimentConfig:
    """設定辞書を検証して ExperimentConfig を作る

    最初に見つかった不正なフィールドのキーを含む ConfigError を送出する。
    """
    config = _merge(DEFAULT_CONFIG, config)
    dataset = _build_dataset(config["dataset"])
    train_config = _build_train(config["train"])

    section = config["experiment"]
    axis = _field(section, "axis", "experiment.axis", str)
    if axis not in SUPPORTED_SWEEP_AXES:
        raise ConfigError(f"experiment.axis が不正です: {axis}")
    values = _number_list(section, "values", "experiment.values")
    if axis != "none" and not values:
        raise ConfigError("experiment.values は空にできません (axis を指定した場合)")
    if axis == "alpha" and any(not 0.0 <= v <= 1.0 for v in values):
        raise ConfigError(f"experiment.values は [0, 1] の範囲が必要です (axis=alpha): {values}")
    if axis == "lambda" and any(v < 0 for v in values):
        raise ConfigError(f"experiment.values は0以上が必要です (axis=lambda): {values}")

    seeds = _number_list(section, "seeds", "experiment.seeds", int)
    if not seeds:
        raise ConfigError("experiment.seeds は空にできません")
    scorers = [str(s) for s in (section["scorers"] or [])]
    if not scorers or any(s not in SUPPORTED_SCORERS for s in scorers):
        raise ConfigError(f"experiment.scorers が不正です: {scorers}")
    jobs = _field(section, "jobs", "experiment.jobs", int)
    if jobs < 1:
        raise ConfigError(f"experiment.jobs は1以上が必要です: {jobs}")
    lr_grid = _number_list(section, "lr_grid", "experiment.lr_grid")
    if any(v <= 0 for v in lr_grid):
        raise ConfigError(f"experiment.lr_grid は正の値のみ指定できます: {lr_grid}")
    lambda_grid = _number_list(section, "lambda_grid", "experiment.lambda_grid")
    if any(v < 0 for v in lambda_grid):
        raise ConfigError(f"experiment.lambda_grid は0以上の値のみ指定できます: {lambda_grid}")
    gamma_grid = _number_list(section, "gamma_grid", "experiment.gamma_grid")

    return ExperimentConfig(
        dataset=dataset,
        train=train_config,
        axis=axis,
        values=tuple(values),
        seeds=tuple(seeds),
        scorers=tuple(scorers),
        jobs=jobs,
        out_dir=_field(section, "out_dir", "experiment.out_dir", str),
        lr_grid=tuple(lr_grid),
        lambda_grid=tuple(lambda_grid),
        gamma_grid=tuple(gamma_grid),
        raw=config,
    )
