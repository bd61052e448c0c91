"""
prism-forge CLIメインモジュール

終了コード: 0 成功 / 1 設定・引数エラー / 2 実行時エラー
"""

import logging
import sys
from typing import Optional, Sequence

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.text import Text

from . import __version__
from .commands.compare import compare_command
from .commands.correlate import correlate_command
from .commands.evaluate import evaluate_command
from .commands.init import init_command
from .commands.sweep import sweep_command
from .commands.synth import synth_command
from .commands.theory import theory_command
from .commands.train import train_command
from .exceptions import ConfigError, PrismForgeError

console = Console()
error_console = Console(stderr=True)

LOGGER_NAME = "prism_forge"
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURE = 2


def print_banner():
    """CLIバナーを表示"""
    banner_text = Text("prism-forge", style="bold blue")
    subtitle = Text(f"v{__version__} - 重み減衰と埋め込みノルムの解析ツールキット", style="dim")

    panel = Panel(
        Text.assemble(banner_text, "\n", subtitle),
        expand=False,
        border_style="blue",
        padding=(1, 2),
    )
    console.print(panel)


def configure_logging(verbose: bool) -> None:
    """パッケージロガーに RichHandler を1つだけ付ける"""
    logger = logging.getLogger(LOGGER_NAME)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=error_console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


@click.group(invoke_without_command=True)
@click.version_option(version=__version__, prog_name="prism-forge")
@click.option("--verbose", "-v", is_flag=True, help="詳細な出力を表示")
@click.pass_context
def cli(ctx: click.Context, verbose: bool):
    """
    重み減衰と埋め込みノルムの解析ツールキット

    重み減衰による人気度エンコードの理論計算と、PRISM初期化による学習・評価を行います。
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    configure_logging(verbose)

    if ctx.invoked_subcommand is None:
        print_banner()
        console.print("\n[bold green]使用可能なコマンド:[/bold green]")
        console.print("  [cyan]init[/cyan]      - 設定ファイルの作成")
        console.print("  [cyan]synth[/cyan]     - 合成インタラクションの生成")
        console.print("  [cyan]train[/cyan]     - 1回の学習と評価")
        console.print("  [cyan]evaluate[/cyan]  - 保存済みモデルの評価")
        console.print("  [cyan]sweep[/cyan]     - λ / α のスイープ")
        console.print("  [cyan]compare[/cyan]   - チューニング済み重み減衰 vs PRISM")
        console.print("  [cyan]correlate[/cyan] - ノルムと人気度の相関")
        console.print("  [cyan]theory[/cyan]    - 期待ノルム変化の閉形式とモンテカルロ")
        console.print("\nヘルプ: [dim]prism-forge --help[/dim]")


# サブコマンドの登録
cli.add_command(init_command, name="init")
cli.add_command(synth_command, name="synth")
cli.add_command(train_command, name="train")
cli.add_command(evaluate_command, name="evaluate")
cli.add_command(sweep_command, name="sweep")
cli.add_command(compare_command, name="compare")
cli.add_command(correlate_command, name="correlate")
cli.add_command(theory_command, name="theory")


def run(args: Optional[Sequence[str]] = None) -> int:
    """CLIを実行して終了コードを返す"""
    try:
        result = cli.main(args=list(args) if args is not None else None, prog_name="prism-forge", standalone_mode=False)
    except (KeyboardInterrupt, click.Abort):
        error_console.print("\n[yellow]処理を中断しました。[/yellow]")
        return EXIT_FAILURE
    except click.UsageError as e:
        e.show(file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        error_console.print(f"[red]設定エラー: {e}[/red]")
        return EXIT_CONFIG
    except PrismForgeError as e:
        error_console.print(f"[red]エラーが発生しました: {e}[/red]")
        return EXIT_FAILURE
    except click.ClickException as e:
        e.show(file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logging.getLogger(LOGGER_NAME).debug("unhandled error", exc_info=True)
        error_console.print(f"[red]エラーが発生しました: {e}[/red]")
        return EXIT_FAILURE
    return result if isinstance(result, int) else EXIT_OK


def main():
    """エントリーポイント"""
    sys.exit(run())


if __name__ == "__main__":
    main()
