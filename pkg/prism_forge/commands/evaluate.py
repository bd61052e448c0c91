"""
評価コマンド実装
"""

from pathlib import Path
from typing import Any, Optional, Tuple

import click
from rich.console import Console

from ..config.settings import METRICS_FILE
from ..data.interactions import SplitData
from ..evaluation.evaluator import METRICS_COLUMNS, metrics_frame
from ..exceptions import EmbeddingFormatError
from ..training.persistence import ModelArtifacts, load_model
from ..utils.file_manager import FileManager
from .common import confirm_overwrite, evaluate_tables, experiment_options, load_splits, metrics_table, resolve_experiment, scorer_configs

console = Console()


def check_model_shape(model: ModelArtifacts, data: SplitData) -> None:
    """テーブルの行数がデータセットのID空間と一致するか確認"""
    if model.users.rows != data.n_users or model.items.rows != data.n_items:
        raise EmbeddingFormatError(
            f"モデル ({model.users.rows} users, {model.items.rows} items) と"
            f"データセット ({data.n_users} users, {data.n_items} items) が一致しません"
        )


@click.command()
@click.option("--model", "-m", "model_dir", required=True, type=click.Path(exists=True, file_okay=False), help="モデルディレクトリ")
@click.option("--split", type=click.Choice(["test", "val"]), default="test", show_default=True, help="評価する分割")
@click.option("--final", is_flag=True, help="最良エポックではなく最終テーブルを評価")
@click.option("--run-name", default="evaluate", show_default=True, help="metrics.csv の run 列")
@click.option("--force", is_flag=True, help="既存の出力を上書き")
@experiment_options
@click.pass_context
def evaluate_command(
    ctx: click.Context,
    model_dir: str,
    split: str,
    final: bool,
    run_name: str,
    force: bool,
    config_path: Optional[str],
    overrides: Tuple[str, ...],
    **flags: Any,
):
    """保存済みモデルを設定されたすべての類似度で評価します"""
    experiment = resolve_experiment(config_path, overrides, flags)
    output = Path(experiment.out_dir) / METRICS_FILE
    if not confirm_overwrite(output, force):
        console.print("[yellow]評価をキャンセルしました。[/yellow]")
        return

    model = load_model(model_dir, best=not final)
    data = load_splits(experiment)
    check_model_shape(model, data)

    with console.status(f"{split} 分割を評価中..."):
        reports = evaluate_tables(model.users, model.items, data, scorer_configs(experiment), split=split)
    rows = [report.as_row(run_name, scorer) for scorer, report in reports]
    FileManager.write_csv(output, metrics_frame(rows), METRICS_COLUMNS)

    console.print(metrics_table(rows))
    console.print(f"\n[bold green]✓ 評価が完了しました[/bold green] 出力: [dim]{output}[/dim]")
