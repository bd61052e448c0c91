"""
コマンド共通の処理 (設定の解決・データ読み込み・評価・表示)
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
import questionary
from rich.table import Table

from ..config import SUPPORTED_DECAY_MODES, SUPPORTED_INIT_STRATEGIES, SUPPORTED_LOSSES, get_config_path
from ..config.loader import ExperimentConfig, apply_flags, apply_overrides, build_experiment_config, load_config
from ..data.interactions import InteractionSet, SplitData, generate_synthetic, load_interactions, prepare_splits
from ..embeddings.table import EmbeddingTable
from ..evaluation.evaluator import MetricsReport, ScorerConfig, evaluate_split

logger = logging.getLogger(__name__)


def experiment_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """設定ファイルとその上書きフラグをまとめて付ける"""
    options = [
        click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False), help="設定ファイル (.prism-forge.yml)"),
        click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="設定値の上書き (例: train.patience=5)"),
        click.option("--dataset", "-d", type=click.Path(dir_okay=False), help="インタラクションファイル"),
        click.option("--loss", type=click.Choice(SUPPORTED_LOSSES), help="ランキング損失"),
        click.option("--lambda", "lam", type=float, help="重み減衰 λ"),
        click.option("--wd-mode", type=click.Choice(SUPPORTED_DECAY_MODES), help="重み減衰のモード"),
        click.option("--init", type=click.Choice(SUPPORTED_INIT_STRATEGIES), help="初期化方法"),
        click.option("--alpha", type=float, help="PRISMの α (指定するとPRISM初期化)"),
        click.option("--lr", type=float, help="学習率 η"),
        click.option("--batch-size", type=int, help="バッチサイズ"),
        click.option("--dim", type=int, help="埋め込み次元"),
        click.option("--max-epochs", type=int, help="最大エポック数"),
        click.option("--seed", type=int, help="学習の乱数シード"),
        click.option("--seeds", type=int, multiple=True, help="スイープのシード (複数指定可)"),
        click.option("--jobs", "-j", type=int, help="並列ジョブ数"),
        click.option("--out-dir", "-o", type=click.Path(file_okay=False), help="出力ディレクトリ"),
    ]

    for option in reversed(options):
        func = option(func)
    return func


FLAG_NAMES = (
    "dataset", "loss", "lam", "wd_mode", "init", "alpha", "lr", "batch_size",
    "dim", "max_epochs", "seed", "seeds", "jobs", "out_dir",
)


def resolve_experiment(
    config_path: Optional[str], overrides: Sequence[str], flags: Dict[str, Any]
) -> ExperimentConfig:
    """設定ファイル → --set → 個別フラグの順に重ねて検証"""
    if config_path is None and get_config_path().exists():
        config_path = str(get_config_path())
        logger.info("using %s", config_path)
    config = load_config(config_path)
    config = apply_overrides(config, overrides)
    config = apply_flags(config, {name: flags.get(name) for name in FLAG_NAMES})
    return build_experiment_config(config)


def load_dataset(experiment: ExperimentConfig) -> InteractionSet:
    """ファイルが指定されていれば読み込み、なければ合成データを作る"""
    dataset = experiment.dataset
    if dataset.path is None:
        spec = dataset.synthetic
        return generate_synthetic(spec.n_users, spec.n_items, spec.n_edges, spec.exponent, spec.seed)
    return load_interactions(
        dataset.path,
        delimiter=dataset.delimiter,
        value_column=dataset.value_column,
        min_value=dataset.min_value,
    )


def load_splits(experiment: ExperimentConfig) -> SplitData:
    return prepare_splits(load_dataset(experiment), experiment.dataset.split, experiment.dataset.split_seed)


def scorer_configs(experiment: ExperimentConfig) -> List[ScorerConfig]:
    train = experiment.train
    return [ScorerConfig(similarity, train.eval_k, train.window) for similarity in experiment.scorers]


def evaluate_tables(
    users: EmbeddingTable,
    items: EmbeddingTable,
    data: SplitData,
    scorers: Sequence[ScorerConfig],
    split: str = "test",
) -> List[Tuple[ScorerConfig, MetricsReport]]:
    """test (train ∪ val を除外) または val (train を除外) で評価"""
    return [(scorer, evaluate_split(users, items, data, scorer, split)) for scorer in scorers]


def confirm_overwrite(path: Path, force: bool) -> bool:
    """既存の出力があれば上書きを確認 (--force で省略)"""
    if force or not path.exists() or (path.is_dir() and not any(path.iterdir())):
        return True
    return bool(questionary.confirm(f"{path} は既に存在します。上書きしますか？", default=False).ask())


def metrics_table(rows: Sequence[Dict[str, Any]], title: str = "評価結果") -> Table:
    table = Table(title=title)
    table.add_column("run", style="cyan")
    table.add_column("scorer")
    for column in ("overall", "popular", "neutral", "unpopular", "debias"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            str(row["run"]),
            str(row["scorer"]),
            f"{row['ndcg_overall']:.4f}",
            f"{row['ndcg_popular']:.4f}",
            f"{row['ndcg_neutral']:.4f}",
            f"{row['ndcg_unpopular']:.4f}",
            f"{row['debias_ratio']:.4f}",
        )
    return table
