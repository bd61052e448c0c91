"""
prism-forge: 協調フィルタリングにおける重み減衰と埋め込みノルムの解析ツールキット

重み減衰がアイテム人気度を埋め込みノルムへ符号化する仕組みの理論計算・検証と、
人気度を初期化で直接エンコードする PRISM を提供するCLIツール
"""

__version__ = "0.1.0"
__author__ = "Sayaka"
__email__ = "your-email@example.com"
__description__ = "重み減衰と埋め込みノルムの解析ツールキット"

from .cli import main, run

__all__ = ["main", "run"]
