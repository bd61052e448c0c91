"""
学習コマンド実装
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from ..config.loader import ExperimentConfig, dump_config
from ..config.settings import EPOCH_LOG_FILE, METRICS_FILE
from ..data.interactions import SplitData
from ..evaluation.evaluator import METRICS_COLUMNS, metrics_frame
from ..training.persistence import save_model, write_epoch_log
from ..training.trainer import EpochLog, EpochRecord, TrainedModel, train
from ..utils.file_manager import FileManager
from .common import confirm_overwrite, evaluate_tables, experiment_options, load_splits, metrics_table, resolve_experiment, scorer_configs

console = Console()

MODEL_DIR = "model"
RESOLVED_CONFIG_FILE = "config.yml"


@click.command()
@experiment_options
@click.option("--run-name", default="train", show_default=True, help="metrics.csv の run 列")
@click.option("--force", is_flag=True, help="既存の出力を上書き")
@click.pass_context
def train_command(
    ctx: click.Context, config_path: Optional[str], overrides: Tuple[str, ...], run_name: str, force: bool, **flags: Any
):
    """1回学習し、モデル・エポックログ・評価結果を書き出します"""
    experiment = resolve_experiment(config_path, overrides, flags)
    out_dir = Path(experiment.out_dir)
    if not confirm_overwrite(out_dir, force):
        console.print("[yellow]学習をキャンセルしました。[/yellow]")
        return

    data = load_splits(experiment)
    console.print("\n[bold green]prism-forge 学習[/bold green]")
    console.print(
        f"損失: [cyan]{experiment.train.loss.kind}[/cyan]  "
        f"減衰: [cyan]{experiment.train.loss.decay.mode} λ={experiment.train.loss.decay.lam:g}[/cyan]  "
        f"初期化: [cyan]{experiment.train.init.strategy}[/cyan]"
    )
    console.print(
        f"ユーザー {data.n_users} / アイテム {data.n_items} / 学習 {len(data.train)} 件\n"
    )

    model, log = _train_with_progress(experiment, data)
    rows = run_artifacts(experiment, data, model, log, out_dir, run_name)

    console.print(metrics_table(rows))
    console.print(f"\n[bold green]✓ 学習が完了しました[/bold green] (best epoch {model.best_epoch} / {model.epochs_run})")
    console.print(f"出力: [dim]{out_dir}[/dim]")


def _train_with_progress(experiment: ExperimentConfig, data: SplitData) -> Tuple[TrainedModel, EpochLog]:
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task("学習中...", total=experiment.train.max_epochs)

        def on_epoch(record: EpochRecord) -> None:
            progress.update(
                task,
                advance=1,
                description=f"epoch {record.epoch}  val NDCG {record.val_ndcg_dot:.4f}",
            )

        return train(experiment.train, data, on_epoch=on_epoch)


def run_artifacts(
    experiment: ExperimentConfig,
    data: SplitData,
    model: TrainedModel,
    log: EpochLog,
    out_dir: Path,
    run_name: str,
) -> List[Dict[str, Any]]:
    """モデルディレクトリ・エポックログ・metrics.csv・解決済み設定を書き出す"""
    FileManager.ensure_directory_exists(out_dir)
    save_model(model, out_dir / MODEL_DIR, extra={"experiment_hash": experiment.config_hash})
    write_epoch_log(log, out_dir / EPOCH_LOG_FILE)
    FileManager.write_file(out_dir / RESOLVED_CONFIG_FILE, dump_config(experiment.raw))

    reports = evaluate_tables(model.best_users, model.best_items, data, scorer_configs(experiment))
    rows = [report.as_row(run_name, scorer) for scorer, report in reports]
    FileManager.write_csv(out_dir / METRICS_FILE, metrics_frame(rows), METRICS_COLUMNS)
    return rows
