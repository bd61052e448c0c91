"""埋め込みテーブルモジュール"""

from .magnitude import MagnitudeReport, magnitude_popularity_correlation
from .table import (
    TABLE_HEADER_SIZE,
    EmbeddingTable,
    InitSpec,
    decode_table,
    dump_table,
    encode_table,
    init_xavier,
    initialize_tables,
    load_table,
    magnitudes,
    prism_init,
    prism_target_magnitude,
)

__all__ = [
    "TABLE_HEADER_SIZE",
    "EmbeddingTable",
    "InitSpec",
    "MagnitudeReport",
    "decode_table",
    "dump_table",
    "encode_table",
    "init_xavier",
    "initialize_tables",
    "load_table",
    "magnitude_popularity_correlation",
    "magnitudes",
    "prism_init",
    "prism_target_magnitude",
]
