"""
ファイル管理ユーティリティ

成果物はすべて一時ファイルへ書き込んでからリネームする (途中で中断しても
壊れたファイルが残らない)。
"""

import os
import tempfile
from pathlib import Path
from typing import Dict, Sequence, Union

import pandas as pd

from ..config.settings import FLOAT_FORMAT

PathLike = Union[str, Path]


class FileManager:
    """ファイル操作を管理するクラス"""

    @staticmethod
    def write_bytes(file_path: PathLike, content: bytes) -> None:
        """バイト列をアトミックに書き込み"""
        file_path = Path(file_path)

        # ディレクトリが存在しない場合は作成
        file_path.parent.mkdir(parents=True, exist_ok=True)

        fd, tmp_name = tempfile.mkstemp(
            prefix=f".{file_path.name}.", suffix=".tmp", dir=file_path.parent
        )
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(content)
            os.replace(tmp_name, file_path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    @staticmethod
    def write_file(file_path: PathLike, content: str, encoding: str = "utf-8") -> None:
        """テキストをアトミックに書き込み"""
        FileManager.write_bytes(file_path, content.encode(encoding))

    @staticmethod
    def read_file(file_path: PathLike, encoding: str = "utf-8") -> str:
        """ファイルの内容を読み込み"""
        with open(file_path, "r", encoding=encoding) as f:
            return f.read()

    @staticmethod
    def read_bytes(file_path: PathLike) -> bytes:
        """ファイルの内容をバイト列で読み込み"""
        return Path(file_path).read_bytes()

    @staticmethod
    def write_csv(
        file_path: PathLike, frame: pd.DataFrame, columns: Sequence[str]
    ) -> None:
        """固定ヘッダーのCSVを書き込み (浮動小数点は17桁)"""
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise KeyError(f"CSVに必要な列がありません: {', '.join(missing)}")
        content = frame.loc[:, list(columns)].to_csv(
            index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
        FileManager.write_file(file_path, content)

    @staticmethod
    def read_csv(file_path: PathLike) -> pd.DataFrame:
        """CSVを読み込み (浮動小数点は往復精度で復元)"""
        return pd.read_csv(file_path, float_precision="round_trip", keep_default_na=True)

    @staticmethod
    def write_key_values(file_path: PathLike, values: Dict[str, object]) -> None:
        """`key = value` 形式のフラットなテキストを書き込み"""
        lines = [f"{key} = {value}" for key, value in values.items()]
        FileManager.write_file(file_path, "\n".join(lines) + "\n")

    @staticmethod
    def read_key_values(file_path: PathLike) -> Dict[str, str]:
        """`key = value` 形式のテキストを読み込み"""
        values: Dict[str, str] = {}
        for line in FileManager.read_file(file_path).splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        return values

    @staticmethod
    def file_exists(file_path: PathLike) -> bool:
        """ファイルが存在するかチェック"""
        return Path(file_path).exists()

    @staticmethod
    def get_file_size(file_path: PathLike) -> int:
        """ファイルサイズを取得（バイト単位）"""
        return Path(file_path).stat().st_size

    @staticmethod
    def ensure_directory_exists(dir_path: PathLike) -> None:
        """ディレクトリが存在することを保証"""
        Path(dir_path).mkdir(parents=True, exist_ok=True)
