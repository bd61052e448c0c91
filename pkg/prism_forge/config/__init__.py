"""設定モジュール

YAMLの読み込みとデータクラスへの変換は `prism_forge.config.loader` にある。
"""

from .settings import (
    CONFIG_FILE_NAME,
    DEFAULT_BATCH_SIZES,
    DEFAULT_CONFIG,
    DIRECTAU_GAMMA_GRID,
    SUPPORTED_DECAY_MODES,
    SUPPORTED_INIT_STRATEGIES,
    SUPPORTED_LOSSES,
    SUPPORTED_NDCG_WINDOWS,
    SUPPORTED_SCORERS,
    SUPPORTED_SWEEP_AXES,
    TEMPLATE_PATHS,
    get_config_path,
    get_template_dir,
)

__all__ = [
    "CONFIG_FILE_NAME",
    "DEFAULT_BATCH_SIZES",
    "DEFAULT_CONFIG",
    "DIRECTAU_GAMMA_GRID",
    "SUPPORTED_DECAY_MODES",
    "SUPPORTED_INIT_STRATEGIES",
    "SUPPORTED_LOSSES",
    "SUPPORTED_NDCG_WINDOWS",
    "SUPPORTED_SCORERS",
    "SUPPORTED_SWEEP_AXES",
    "TEMPLATE_PATHS",
    "get_config_path",
    "get_template_dir",
]
