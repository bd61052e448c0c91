"""
初期化コマンド実装
"""

import copy
from pathlib import Path
from typing import Any, Dict, Optional

import click
import questionary
from rich.console import Console

from ..config import (
    DEFAULT_BATCH_SIZES,
    DEFAULT_CONFIG,
    DIRECTAU_GAMMA_GRID,
    SUPPORTED_DECAY_MODES,
    SUPPORTED_INIT_STRATEGIES,
    SUPPORTED_LOSSES,
    get_config_path,
)
from ..config.loader import build_experiment_config, dump_config
from ..utils.file_manager import FileManager

console = Console()


@click.command()
@click.option("--dataset", "-d", type=click.Path(dir_okay=False), help="インタラクションファイル (省略時は合成データ)")
@click.option("--loss", type=click.Choice(SUPPORTED_LOSSES), help="ランキング損失")
@click.option("--init", "init_strategy", type=click.Choice(SUPPORTED_INIT_STRATEGIES), help="初期化方法")
@click.option("--interactive/--no-interactive", "-i", default=True, help="対話モードで実行")
@click.option("--force", is_flag=True, help="既存の設定を上書き")
def init_command(
    dataset: Optional[str],
    loss: Optional[str],
    init_strategy: Optional[str],
    interactive: bool,
    force: bool,
):
    """実験設定ファイル (.prism-forge.yml) を作成します"""
    current_dir = Path.cwd()
    config_path = get_config_path(current_dir)

    # 既存設定の確認
    if config_path.exists() and not force:
        if not questionary.confirm("既存の設定ファイルが見つかりました。上書きしますか？", default=False).ask():
            console.print("[yellow]初期化をキャンセルしました。[/yellow]")
            return

    config = collect_configuration(dataset, loss, init_strategy, interactive)
    # 書き出す前に検証 (不正な値ならここで ConfigError)
    build_experiment_config(config)
    FileManager.write_file(config_path, dump_config(config))

    console.print(f"\n[bold green]✓ 設定ファイルを作成しました[/bold green]: [dim]{config_path}[/dim]")
    _show_next_steps()


def collect_configuration(
    dataset: Optional[str], loss: Optional[str], init_strategy: Optional[str], interactive: bool
) -> Dict[str, Any]:
    """設定情報を収集 (対話モードでは未指定の項目を質問する)"""
    config = copy.deepcopy(DEFAULT_CONFIG)

    if interactive:
        if dataset is None:
            answer = questionary.text("インタラクションファイル (空欄なら合成データ):", default="").ask()
            dataset = answer or None
        if loss is None:
            loss = questionary.select(
                "ランキング損失を選択してください:",
                choices=[
                    {"name": "DirectAU (推奨)", "value": "DirectAU"},
                    {"name": "MAWU", "value": "MAWU"},
                    {"name": "SSM", "value": "SSM"},
                    {"name": "BPR", "value": "BPR"},
                ],
            ).ask()
        if init_strategy is None:
            use_prism = questionary.confirm("PRISM初期化を使いますか？ (λ=0 で学習)", default=True).ask()
            init_strategy = "prism" if use_prism else "xavier_uniform"
        if init_strategy == "xavier_uniform":
            mode = questionary.select("重み減衰のモード:", choices=SUPPORTED_DECAY_MODES, default="full").ask()
            config["train"]["decay"]["mode"] = mode

    loss = loss or config["train"]["loss"]["kind"]
    init_strategy = init_strategy or config["train"]["init"]["strategy"]

    config["dataset"]["path"] = dataset
    config["train"]["loss"]["kind"] = loss
    config["train"]["batch_size"] = DEFAULT_BATCH_SIZES[loss]
    if loss == "DirectAU":
        config["experiment"]["gamma_grid"] = list(DIRECTAU_GAMMA_GRID)
    config["train"]["init"]["strategy"] = init_strategy
    if init_strategy == "prism":
        config["train"]["decay"]["lambda"] = 0.0
    return config


def _show_next_steps() -> None:
    console.print("\n[bold blue]次のステップ:[/bold blue]")
    console.print("1. [cyan]pf train[/cyan] で1回学習")
    console.print("2. [cyan]pf sweep --axis alpha --values 0 --values 0.5 --values 1[/cyan] でαをスイープ")
    console.print("3. [cyan]pf compare[/cyan] でチューニング済み重み減衰とPRISMを比較")
