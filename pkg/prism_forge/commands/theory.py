"""
理論計算コマンド実装 (heatmap / oracle / point)
"""

from pathlib import Path
from typing import List, Optional

import click
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..exceptions import ConfigError
from ..theory.closed_form import (
    TheoryParams,
    batched_decay_expected_change,
    dot_update_expected_change,
    expected_magnitude_change,
    inclusion_probability,
    negsample_expected_change,
)
from ..theory.oracle import (
    DEFAULT_HEATMAP_BATCH_FRACTIONS,
    DEFAULT_HEATMAP_DEGREES,
    DEFAULT_ORACLE_BATCH_FRACTIONS,
    DEFAULT_ORACLE_DEGREES,
    HEATMAP_COLUMNS,
    HEATMAP_COS_SQ,
    ORACLE_COLUMNS,
    heatmap_grid,
    oracle_grid,
)
from ..utils.file_manager import FileManager
from .common import confirm_overwrite

console = Console()

POINT_COLUMNS = ["quantity", "value"]


def parse_floats(value: Optional[str], name: str) -> Optional[List[float]]:
    """カンマ区切りの数値リスト"""
    if value is None:
        return None
    try:
        values = [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"{name} はカンマ区切りの数値で指定してください: {value}") from e
    if not values:
        raise ConfigError(f"{name} が空です")
    return values


def _common_options(func):
    options = [
        click.option("--eta", type=float, default=0.01, show_default=True, help="学習率 η"),
        click.option("--lambda", "lam", type=float, default=1e-6, show_default=True, help="重み減衰 λ"),
        click.option("--cos-sq", type=float, default=HEATMAP_COS_SQ, show_default=True, help="cos² の点の値"),
        click.option("--exp-sq-mag", type=float, default=1.0, show_default=True, help="E[||i||²] の点の値"),
        click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="出力CSV"),
        click.option("--force", is_flag=True, help="既存のファイルを上書き"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
def theory_command():
    """ノルム変化の閉形式とモンテカルロ検証"""


@theory_command.command("heatmap")
@_common_options
@click.option("--degrees", help="次数のリスト (カンマ区切り、既定は1〜1000の対数間隔)")
@click.option("--fractions", help="バッチ比 |B|/|E| のリスト (カンマ区切り)")
def heatmap(eta: float, lam: float, cos_sq: float, exp_sq_mag: float, output: str, force: bool,
            degrees: Optional[str], fractions: Optional[str]):
    """(次数, バッチ比) グリッドの期待ノルム変化を書き出します"""
    path = Path(output)
    if not confirm_overwrite(path, force):
        console.print("[yellow]処理をキャンセルしました。[/yellow]")
        return
    grid = heatmap_grid(
        parse_floats(degrees, "--degrees") or DEFAULT_HEATMAP_DEGREES,
        parse_floats(fractions, "--fractions") or DEFAULT_HEATMAP_BATCH_FRACTIONS,
        eta=eta, lam=lam, cos_sq=cos_sq, exp_sq_mag=exp_sq_mag,
    )
    FileManager.write_csv(path, grid, HEATMAP_COLUMNS)
    console.print(f"[green]✓[/green] {path}: {len(grid)} セル")


@theory_command.command("oracle")
@_common_options
@click.option("--degrees", help="次数のリスト (カンマ区切り、整数)")
@click.option("--fractions", help="バッチ比 |B|/|E| のリスト (カンマ区切り)")
@click.option("--trials", type=int, default=100_000, show_default=True, help="セルごとの試行回数")
@click.option("--dim", type=int, default=8, show_default=True, help="ベクトルの次元")
@click.option("--seed", type=int, default=0, show_default=True, help="乱数シード")
def oracle(eta: float, lam: float, cos_sq: float, exp_sq_mag: float, output: str, force: bool,
           degrees: Optional[str], fractions: Optional[str], trials: int, dim: int, seed: int):
    """閉形式とモンテカルロを比較し、z スコア付きで書き出します"""
    path = Path(output)
    if not confirm_overwrite(path, force):
        console.print("[yellow]処理をキャンセルしました。[/yellow]")
        return
    d_range = parse_floats(degrees, "--degrees") or DEFAULT_ORACLE_DEGREES
    bfrac_range = parse_floats(fractions, "--fractions") or DEFAULT_ORACLE_BATCH_FRACTIONS

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task("モンテカルロ実行中...", total=len(d_range) * len(bfrac_range))
        grid = oracle_grid(
            d_range, bfrac_range, eta=eta, lam=lam, cos_sq=cos_sq, exp_sq_mag=exp_sq_mag,
            dim=dim, trials=trials, seed=seed, progress=lambda: progress.advance(task),
        )
    FileManager.write_csv(path, grid, ORACLE_COLUMNS)

    worst = float(grid["z"].abs().max())
    style = "green" if worst < 3 else "yellow"
    console.print(f"[{style}]✓[/{style}] {path}: {len(grid)} セル, max |z| = {worst:.3f}")


@theory_command.command("point")
@_common_options
@click.option("--degree", type=float, required=True, help="アイテムの次数 d_i")
@click.option("--batch-size", type=float, required=True, help="|B|")
@click.option("--total-edges", type=float, required=True, help="|E|")
@click.option("--n-items", type=float, help="|I| (--gamma と併用)")
@click.option("--gamma", type=int, default=0, show_default=True, help="正例あたりの負例数 γ")
@click.option("--exp-dot", type=float, default=0.0, show_default=True, help="E[u·i] (内積形式用)")
@click.option("--exp-u-sq", type=float, default=1.0, show_default=True, help="E[||u||²] (内積形式用)")
def point(eta: float, lam: float, cos_sq: float, exp_sq_mag: float, output: str, force: bool,
          degree: float, batch_size: float, total_edges: float, n_items: Optional[float], gamma: int,
          exp_dot: float, exp_u_sq: float):
    """1組のパラメータで各形式の期待ノルム変化を計算します"""
    path = Path(output)
    if not confirm_overwrite(path, force):
        console.print("[yellow]処理をキャンセルしました。[/yellow]")
        return
    params = TheoryParams(
        eta=eta, lam=lam, batch_size=batch_size, total_edges=total_edges, degree=degree,
        n_items=n_items, gamma=gamma, exp_sq_mag=exp_sq_mag, cos_sq=cos_sq,
    )
    values = [
        ("inclusion_probability", inclusion_probability(params)),
        ("full_decay", expected_magnitude_change(params)),
        ("batched_decay", batched_decay_expected_change(params)),
        ("negsample", negsample_expected_change(params)),
        ("dot_update", dot_update_expected_change(params, exp_dot, exp_u_sq)),
    ]
    frame = pd.DataFrame(values, columns=POINT_COLUMNS)
    FileManager.write_csv(path, frame, POINT_COLUMNS)

    table = Table(title="期待ノルム変化")
    table.add_column("quantity", style="cyan")
    table.add_column("value", justify="right")
    for name, value in values:
        table.add_row(name, f"{value:.6e}")
    console.print(table)
