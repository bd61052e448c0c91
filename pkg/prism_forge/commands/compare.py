"""
比較コマンド実装 (チューニング済み重み減衰 vs PRISM)
"""

import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import pandas as pd
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..config.loader import ExperimentConfig
from ..config.settings import COMPARE_FILE, SUMMARY_FILE
from ..data.interactions import SplitData
from ..evaluation.evaluator import ScorerConfig
from ..exceptions import ConfigError
from ..generators.report_generator import SUMMARY_METRICS, ReportGenerator
from ..training.grid import GRID_COLUMNS, GridResult, grid_search
from ..training.trainer import TrainConfig, epochs_to_convergence
from ..utils.file_manager import FileManager
from .common import confirm_overwrite, evaluate_tables, experiment_options, load_splits, resolve_experiment, scorer_configs

console = Console()
logger = logging.getLogger(__name__)

COMPARE_COLUMNS = [
    "method",
    "seed",
    "status",
    "ndcg_overall",
    "ndcg_popular",
    "ndcg_neutral",
    "ndcg_unpopular",
    "debias_ratio",
    "epochs_to_convergence",
    "learning_rate",
    "lambda",
    "error",
]

TUNED_METHOD = "tuned_wd"
PRISM_METHOD = "prism"
GRID_DIR = "grids"


def method_configs(base: TrainConfig, alpha: float) -> Dict[str, TrainConfig]:
    """比較する2手法の基本設定 (λ と学習率はグリッドで決める)"""
    tuned = base.evolve(init=replace(base.init, strategy="xavier_uniform"))
    prism = base.evolve(init=replace(base.init, strategy="prism", alpha=alpha))
    return {TUNED_METHOD: tuned, PRISM_METHOD: prism}


def _method_grids(experiment: ExperimentConfig) -> Dict[str, Tuple[List[float], Optional[List[float]]]]:
    gammas = list(experiment.gamma_grid) if experiment.train.loss.kind == "DirectAU" and experiment.gamma_grid else None
    return {
        TUNED_METHOD: (list(experiment.lambda_grid), gammas),
        PRISM_METHOD: ([0.0], gammas),
    }


def _result_row(method: str, seed: int, result: GridResult, data: SplitData, scorer: ScorerConfig) -> Dict[str, Any]:
    row: Dict[str, Any] = {column: float("nan") for column in COMPARE_COLUMNS}
    row.update(method=method, seed=seed)
    if result.best_model is None or result.best_log is None:
        errors = [e for e in result.table["error"] if e]
        row.update(status="failed", error=errors[0] if errors else "全セルが失敗しました")
        return row

    model = result.best_model
    report = evaluate_tables(model.best_users, model.best_items, data, [scorer])[0][1]
    row.update(
        status="ok",
        ndcg_overall=report.ndcg_overall,
        ndcg_popular=report.ndcg_popular,
        ndcg_neutral=report.ndcg_neutral,
        ndcg_unpopular=report.ndcg_unpopular,
        debias_ratio=report.debias_ratio,
        epochs_to_convergence=epochs_to_convergence(result.best_log),
        learning_rate=model.config.learning_rate,
        error="",
    )
    row["lambda"] = model.config.loss.decay.lam
    return row


def aggregate_rows(per_seed: pd.DataFrame) -> pd.DataFrame:
    """手法ごとの mean / std 行と、PRISM の tuned に対する相対差 (%) の行"""
    numeric = SUMMARY_METRICS
    rows: List[Dict[str, Any]] = []
    means: Dict[str, pd.Series] = {}
    ok = per_seed[per_seed["status"] == "ok"]
    for method in (TUNED_METHOD, PRISM_METHOD):
        frame = ok[ok["method"] == method][numeric].apply(pd.to_numeric, errors="coerce")
        means[method] = frame.mean()
        std = frame.std(ddof=1) if len(frame) > 1 else pd.Series(float("nan"), index=numeric)
        for label, stats in (("mean", means[method]), ("std", std)):
            row: Dict[str, Any] = {column: float("nan") for column in COMPARE_COLUMNS}
            row.update(method=method, seed=label, status="ok" if len(frame) else "failed", error="")
            row.update({metric: float(stats[metric]) for metric in numeric})
            rows.append(row)

    diff: Dict[str, Any] = {column: float("nan") for column in COMPARE_COLUMNS}
    diff.update(method=f"{PRISM_METHOD}_vs_{TUNED_METHOD}", seed="rel_diff_pct", status="ok", error="")
    for metric in numeric:
        base, other = float(means[TUNED_METHOD][metric]), float(means[PRISM_METHOD][metric])
        diff[metric] = 100.0 * (other - base) / abs(base) if base and not math.isnan(base) else float("nan")
    rows.append(diff)
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)


def run_compare(
    experiment: ExperimentConfig,
    data: SplitData,
    out_dir: Path,
    alpha: float = 1.0,
    progress: Optional[Any] = None,
) -> pd.DataFrame:
    """シードごとに2手法をグリッド探索し、最良モデルを test で評価"""
    if not experiment.lr_grid:
        raise ConfigError("experiment.lr_grid は空にできません")
    if not experiment.lambda_grid:
        raise ConfigError("experiment.lambda_grid は空にできません")
    scorer = scorer_configs(experiment)[0]
    configs = method_configs(experiment.train, alpha)
    grids = _method_grids(experiment)

    rows = []
    for seed in experiment.seeds:
        for method, base in configs.items():
            lambdas, gammas = grids[method]
            logger.info("compare: %s seed=%d (%d cells)", method, seed, len(experiment.lr_grid) * len(lambdas))
            result = grid_search(
                base.evolve(seed=int(seed)), experiment.lr_grid, lambdas, data, gamma_grid=gammas, jobs=experiment.jobs
            )
            FileManager.write_csv(out_dir / GRID_DIR / f"{method}_seed={seed}.csv", result.table, GRID_COLUMNS)
            rows.append(_result_row(method, int(seed), result, data, scorer))
            if progress is not None:
                progress()

    per_seed = pd.DataFrame(rows, columns=COMPARE_COLUMNS)
    return pd.concat([per_seed, aggregate_rows(per_seed)], ignore_index=True)


@click.command()
@experiment_options
@click.option("--prism-alpha", type=float, default=1.0, show_default=True, help="比較に使うPRISMの α")
@click.option("--force", is_flag=True, help="既存の出力を上書き")
@click.pass_context
def compare_command(
    ctx: click.Context,
    config_path: Optional[str],
    overrides: Tuple[str, ...],
    prism_alpha: float,
    force: bool,
    **flags: Any,
):
    """チューニング済み重み減衰とPRISM (λ=0) を比較し、compare.csv と summary.md を書き出します"""
    experiment = resolve_experiment(config_path, overrides, flags)
    out_dir = Path(experiment.out_dir)
    if not confirm_overwrite(out_dir / COMPARE_FILE, force):
        console.print("[yellow]比較をキャンセルしました。[/yellow]")
        return

    data = load_splits(experiment)
    n_runs = 2 * len(experiment.seeds)
    console.print(f"\n[bold green]prism-forge 比較[/bold green] ({len(experiment.seeds)} シード)\n")

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
    ) as progress:
        task = progress.add_task("グリッド探索中...", total=n_runs)
        compare = run_compare(experiment, data, out_dir, prism_alpha, lambda: progress.advance(task))
        progress.update(task, description="サマリーを作成中...")
        FileManager.write_csv(out_dir / COMPARE_FILE, compare, COMPARE_COLUMNS)
        FileManager.write_file(out_dir / SUMMARY_FILE, _render_summary(experiment, compare))

    _show_compare(compare)
    console.print(f"\n[bold green]✓ 比較が完了しました[/bold green] 出力: [dim]{out_dir}[/dim]")


def _render_summary(experiment: ExperimentConfig, compare: pd.DataFrame) -> str:
    train_config = experiment.train
    return ReportGenerator().generate_compare_summary(
        compare,
        {
            "title": "tuned weight decay vs PRISM",
            "loss": train_config.loss.kind,
            "seeds": list(experiment.seeds),
            "lr_grid": list(experiment.lr_grid),
            "lambda_grid": list(experiment.lambda_grid),
            "scorer": experiment.scorers[0],
            "eval_k": train_config.eval_k,
            "window": train_config.window,
            "config_hash": experiment.config_hash,
        },
    )


def _show_compare(compare: pd.DataFrame) -> None:
    table = Table(title="比較結果")
    table.add_column("method", style="cyan")
    table.add_column("seed")
    for column in ("overall", "popular", "unpopular", "debias", "epochs"):
        table.add_column(column, justify="right")
    for row in compare.to_dict("records"):
        table.add_row(
            str(row["method"]),
            str(row["seed"]),
            f"{row['ndcg_overall']:.4f}",
            f"{row['ndcg_popular']:.4f}",
            f"{row['ndcg_unpopular']:.4f}",
            f"{row['debias_ratio']:.4f}",
            f"{row['epochs_to_convergence']:g}",
        )
    console.print(table)
