"""
ノルム・人気度相関コマンド実装
"""

from pathlib import Path
from typing import Any, Optional, Tuple

import click
import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..config.settings import STRATA
from ..embeddings.magnitude import MagnitudeReport, magnitude_popularity_correlation
from ..embeddings.table import EmbeddingTable, magnitudes
from ..exceptions import ConfigError
from ..training.persistence import load_model
from ..training.trainer import initial_tables
from ..utils.file_manager import FileManager
from .common import confirm_overwrite, experiment_options, load_splits, resolve_experiment
from .evaluate import check_model_shape

console = Console()

CORRELATION_FILE = "correlation.csv"
MAGNITUDES_FILE = "magnitudes.csv"
CORRELATION_COLUMNS = ["entity", "pearson_log", "spearman", "defined", "n_entities"]
MAGNITUDE_COLUMNS = ["index", "degree", "magnitude", "stratum"]


def correlation_row(entity: str, report: MagnitudeReport) -> dict:
    return {
        "entity": entity,
        "pearson_log": report.pearson_log,
        "spearman": report.spearman,
        "defined": report.defined,
        "n_entities": report.n_entities,
    }


@click.command()
@click.option("--model", "-m", "model_dir", type=click.Path(exists=True, file_okay=False), help="モデルディレクトリ")
@click.option("--untrained", is_flag=True, help="学習せず、設定の初期化テーブルを診断")
@click.option("--final", is_flag=True, help="最良エポックではなく最終テーブルを使う")
@click.option("--force", is_flag=True, help="既存の出力を上書き")
@experiment_options
@click.pass_context
def correlate_command(
    ctx: click.Context,
    model_dir: Optional[str],
    untrained: bool,
    final: bool,
    force: bool,
    config_path: Optional[str],
    overrides: Tuple[str, ...],
    **flags: Any,
):
    """埋め込みノルムと人気度の相関を correlation.csv / magnitudes.csv に書き出します"""
    if (model_dir is None) == (not untrained):
        raise ConfigError("--model と --untrained のどちらか一方を指定してください")

    experiment = resolve_experiment(config_path, overrides, flags)
    out_dir = Path(experiment.out_dir)
    if not confirm_overwrite(out_dir / CORRELATION_FILE, force):
        console.print("[yellow]処理をキャンセルしました。[/yellow]")
        return

    data = load_splits(experiment)
    if untrained:
        users, items = initial_tables(experiment.train, data)
    else:
        model = load_model(model_dir, best=not final)
        check_model_shape(model, data)
        users, items = model.users, model.items

    item_report = magnitude_popularity_correlation(items, data.popularity.degree)
    user_report = magnitude_popularity_correlation(users, data.popularity.user_degree)
    rows = [correlation_row("item", item_report), correlation_row("user", user_report)]
    FileManager.write_csv(out_dir / CORRELATION_FILE, pd.DataFrame(rows), CORRELATION_COLUMNS)
    FileManager.write_csv(out_dir / MAGNITUDES_FILE, magnitude_frame(items, data.popularity.degree, data.strata.labels), MAGNITUDE_COLUMNS)

    table = Table(title="ノルムと人気度の相関")
    for column in CORRELATION_COLUMNS:
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(row["entity"], f"{row['pearson_log']:.4f}", f"{row['spearman']:.4f}", str(row["defined"]), str(row["n_entities"]))
    console.print(table)
    console.print(f"\n[bold green]✓ 相関を書き出しました[/bold green] 出力: [dim]{out_dir}[/dim]")


def magnitude_frame(items: EmbeddingTable, degree: np.ndarray, labels: np.ndarray) -> pd.DataFrame:
    """アイテムごとの (番号, 次数, ノルム, 層) の散布図用データ"""
    return pd.DataFrame(
        {
            "index": np.arange(items.rows),
            "degree": degree,
            "magnitude": magnitudes(items),
            "stratum": [STRATA[code] for code in labels],
        }
    )
