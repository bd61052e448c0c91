"""
合成データセット生成コマンド実装
"""

from pathlib import Path

import click
from rich.console import Console

from ..config.settings import DEFAULT_CONFIG
from ..data.interactions import generate_synthetic, item_popularity, stratify, write_interactions
from .common import confirm_overwrite

console = Console()

SYNTHETIC_DEFAULTS = DEFAULT_CONFIG["dataset"]["synthetic"]


@click.command()
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="出力ファイル (TSV)")
@click.option("--n-users", type=int, default=SYNTHETIC_DEFAULTS["n_users"], show_default=True, help="ユーザー数")
@click.option("--n-items", type=int, default=SYNTHETIC_DEFAULTS["n_items"], show_default=True, help="アイテム数")
@click.option("--n-edges", type=int, default=SYNTHETIC_DEFAULTS["n_edges"], show_default=True, help="インタラクション数")
@click.option("--exponent", type=float, default=SYNTHETIC_DEFAULTS["exponent"], show_default=True, help="人気度のべき指数")
@click.option("--seed", type=int, default=SYNTHETIC_DEFAULTS["seed"], show_default=True, help="乱数シード")
@click.option("--delimiter", default="\t", show_default=True, help="区切り文字")
@click.option("--force", is_flag=True, help="既存のファイルを上書き")
def synth_command(
    output: str,
    n_users: int,
    n_items: int,
    n_edges: int,
    exponent: float,
    seed: int,
    delimiter: str,
    force: bool,
):
    """べき乗則の人気度を持つ合成インタラクションファイルを生成します"""
    path = Path(output)
    if not confirm_overwrite(path, force):
        console.print("[yellow]生成をキャンセルしました。[/yellow]")
        return

    with console.status("合成データを生成中..."):
        interactions = generate_synthetic(n_users, n_items, n_edges, exponent, seed)
        write_interactions(interactions, path, delimiter=delimiter)

    counts = stratify(item_popularity(interactions)).counts()
    console.print(f"[green]✓[/green] {path}: {len(interactions)} 件 ({interactions.n_users} users, {interactions.n_items} items)")
    console.print("  層: " + ", ".join(f"{name} {count}" for name, count in counts.items()))
