"""
スイープコマンド実装 (重み減衰 λ または PRISM の α)
"""

from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import pandas as pd
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..config.loader import ExperimentConfig
from ..config.settings import SUMMARY_FILE, SWEEP_FILE
from ..data.interactions import SplitData
from ..embeddings.magnitude import magnitude_popularity_correlation
from ..evaluation.evaluator import ScorerConfig
from ..exceptions import ConfigError, PrismForgeError
from ..generators.report_generator import ReportGenerator
from ..training.grid import run_parallel
from ..training.persistence import write_epoch_log
from ..training.trainer import TrainConfig, epochs_to_convergence, train
from ..utils.file_manager import FileManager
from .common import confirm_overwrite, evaluate_tables, experiment_options, load_splits, resolve_experiment, scorer_configs

console = Console()

SWEEP_COLUMNS = [
    "axis",
    "value",
    "seed",
    "scorer",
    "status",
    "ndcg_overall",
    "ndcg_popular",
    "ndcg_neutral",
    "ndcg_unpopular",
    "debias_ratio",
    "epochs_to_convergence",
    "pearson_log",
    "spearman",
    "error",
]

LOG_DIR = "logs"

SweepTask = Tuple[str, float, int, TrainConfig, SplitData, ScorerConfig, Path]


def cell_config(base: TrainConfig, axis: str, value: float, seed: int) -> TrainConfig:
    """スイープ軸の値を反映した学習設定

    lambda 軸では PRISM を無効にし、alpha 軸では λ を0にする。
    """
    loss, init = base.loss, base.init
    if axis == "lambda":
        loss = replace(loss, decay=replace(loss.decay, lam=value))
        init = replace(init, strategy="xavier_uniform")
    elif axis == "alpha":
        loss = replace(loss, decay=replace(loss.decay, lam=0.0))
        init = replace(init, strategy="prism", alpha=value)
    else:
        raise ConfigError(f"experiment.axis が不正です: {axis}")
    return base.evolve(loss=loss, init=init, seed=seed)


def _empty_row(axis: str, value: float, seed: int, scorer: ScorerConfig) -> Dict[str, Any]:
    row: Dict[str, Any] = {column: float("nan") for column in SWEEP_COLUMNS}
    row.update(axis=axis, value=value, seed=seed, scorer=scorer.similarity, status="failed", error="")
    return row


def run_cell(task: SweepTask) -> Dict[str, Any]:
    """1セル (値, シード) を学習して test 分割で評価"""
    axis, value, seed, base, data, scorer, log_dir = task
    row = _empty_row(axis, value, seed, scorer)
    try:
        config = cell_config(base, axis, value, seed)
        model, log = train(config, data)
        write_epoch_log(log, log_dir / f"{axis}={value:g}_seed={seed}.csv")
        report = evaluate_tables(model.best_users, model.best_items, data, [scorer])[0][1]
        correlation = magnitude_popularity_correlation(model.best_items, data.popularity.degree)
    except PrismForgeError as e:
        row["error"] = str(e)
        return row

    row.update(
        status="ok",
        ndcg_overall=report.ndcg_overall,
        ndcg_popular=report.ndcg_popular,
        ndcg_neutral=report.ndcg_neutral,
        ndcg_unpopular=report.ndcg_unpopular,
        debias_ratio=report.debias_ratio,
        epochs_to_convergence=epochs_to_convergence(log),
        pearson_log=correlation.pearson_log,
        spearman=correlation.spearman,
    )
    return row


def run_sweep(experiment: ExperimentConfig, data: SplitData, out_dir: Path, progress: Optional[Any] = None) -> pd.DataFrame:
    """値 × シードの全セルを実行 (行数 = |values| × |seeds|)"""
    if experiment.axis == "none":
        raise ConfigError("experiment.axis を lambda か alpha に設定してください")
    scorer = scorer_configs(experiment)[0]
    log_dir = out_dir / LOG_DIR
    tasks: List[SweepTask] = [
        (experiment.axis, float(value), int(seed), experiment.train, data, scorer, log_dir)
        for value in experiment.values
        for seed in experiment.seeds
    ]
    rows = []
    for row in run_parallel(run_cell, tasks, experiment.jobs):
        rows.append(row)
        if progress is not None:
            progress()
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


@click.command()
@experiment_options
@click.option("--axis", type=click.Choice(["lambda", "alpha"]), help="スイープ軸")
@click.option("--values", "values", type=float, multiple=True, help="スイープする値 (複数指定可)")
@click.option("--force", is_flag=True, help="既存の出力を上書き")
@click.pass_context
def sweep_command(
    ctx: click.Context,
    config_path: Optional[str],
    overrides: Tuple[str, ...],
    axis: Optional[str],
    values: Tuple[float, ...],
    force: bool,
    **flags: Any,
):
    """λ または α をスイープし、sweep.csv と summary.md を書き出します"""
    extra = list(overrides)
    if axis is not None:
        extra.append(f"experiment.axis={axis}")
    if values:
        extra.append(f"experiment.values=[{', '.join(repr(v) for v in values)}]")
    experiment = resolve_experiment(config_path, extra, flags)
    if experiment.axis == "none":
        raise ConfigError("experiment.axis を lambda か alpha に設定してください (--axis)")

    out_dir = Path(experiment.out_dir)
    if not confirm_overwrite(out_dir / SWEEP_FILE, force):
        console.print("[yellow]スイープをキャンセルしました。[/yellow]")
        return

    data = load_splits(experiment)
    n_cells = len(experiment.values) * len(experiment.seeds)
    console.print(f"\n[bold green]prism-forge スイープ[/bold green] ({experiment.axis}: {n_cells} セル)\n")

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
    ) as progress:
        task = progress.add_task("学習中...", total=n_cells)
        sweep = run_sweep(experiment, data, out_dir, lambda: progress.advance(task))
        progress.update(task, description="サマリーを作成中...")
        FileManager.write_csv(out_dir / SWEEP_FILE, sweep, SWEEP_COLUMNS)
        FileManager.write_file(out_dir / SUMMARY_FILE, _render_summary(experiment, sweep))

    _show_sweep(sweep)
    failed = int((sweep["status"] != "ok").sum())
    if failed:
        console.print(f"[yellow]{failed} セルが失敗しました (sweep.csv の error 列を参照)[/yellow]")
    console.print(f"\n[bold green]✓ スイープが完了しました[/bold green] 出力: [dim]{out_dir}[/dim]")


def _render_summary(experiment: ExperimentConfig, sweep: pd.DataFrame) -> str:
    train_config = experiment.train
    return ReportGenerator().generate_sweep_summary(
        sweep,
        {
            "title": f"{experiment.axis} sweep",
            "axis": experiment.axis,
            "loss": train_config.loss.kind,
            "decay_mode": train_config.loss.decay.mode,
            "seeds": list(experiment.seeds),
            "scorer": experiment.scorers[0],
            "eval_k": train_config.eval_k,
            "window": train_config.window,
            "config_hash": experiment.config_hash,
        },
    )


def _show_sweep(sweep: pd.DataFrame) -> None:
    table = Table(title="スイープ結果")
    for column in ("value", "seed", "status", "overall", "popular", "unpopular", "debias", "epochs"):
        table.add_column(column, justify="right")
    for row in sweep.to_dict("records"):
        table.add_row(
            f"{row['value']:g}",
            str(row["seed"]),
            row["status"],
            f"{row['ndcg_overall']:.4f}",
            f"{row['ndcg_popular']:.4f}",
            f"{row['ndcg_unpopular']:.4f}",
            f"{row['debias_ratio']:.4f}",
            f"{row['epochs_to_convergence']:g}",
        )
    console.print(table)
