"""
prism-forge例外モジュール

ドメイン処理はこれらの例外を送出するだけで、表示は行わない。
CLI (`cli.run`) が終了コードへ変換する。
"""


class PrismForgeError(Exception):
    """prism-forge共通の基底例外"""


class ConfigError(PrismForgeError, ValueError):
    """設定値またはCLI引数が不正 (終了コード1)"""


class DataFormatError(PrismForgeError, ValueError):
    """インタラクションファイルが読めない、または書式が不正"""

    def __init__(self, message: str, line_number: int = 0):
        if line_number:
            message = f"{line_number}行目: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyDataError(PrismForgeError, ValueError):
    """評価・学習に使えるデータが存在しない"""


class EmbeddingFormatError(PrismForgeError, ValueError):
    """埋め込みテーブルファイルのヘッダーまたは長さが不正"""


class DegenerateInputError(PrismForgeError, ValueError):
    """ゼロノルム行や定数ベクトルなど、計算が定義できない入力"""


class DivergenceError(PrismForgeError, ArithmeticError):
    """学習中に損失が有限値でなくなった"""


class EvaluationError(PrismForgeError, AssertionError):
    """層別NDCGの分解恒等式が破れた"""
