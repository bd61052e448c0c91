"""
prism-forge設定モジュール
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

# 公開されているハイパーパラメータ探索範囲
LEARNING_RATE_GRID: List[float] = [0.1, 0.01, 0.001]
WEIGHT_DECAY_GRID: List[float] = [0.0, 1e-4, 1e-6, 1e-8]
DIRECTAU_GAMMA_GRID: List[float] = [1.0, 2.0, 5.0]

DEFAULT_NEGATIVE_RATIO = 10

# デフォルト設定
DEFAULT_CONFIG: Dict[str, Any] = {
    "dataset": {
        "path": None,
        "delimiter": "\t",
        "value_column": None,
        "min_value": None,
        "split": [0.8, 0.1, 0.1],
        "split_seed": 0,
        "synthetic": {
            "n_users": 1000,
            "n_items": 500,
            "n_edges": 20000,
            "exponent": 1.0,
            "seed": 0,
        },
    },
    "train": {
        "loss": {
            "kind": "DirectAU",
            "gamma_uniformity": 1.0,
            "gamma_user": 1.0,
            "gamma_item": 1.0,
            "n_negatives": DEFAULT_NEGATIVE_RATIO,
            "temperature": 1.0,
            "reduction": "sum",
        },
        "decay": {
            "mode": "full",
            "lambda": 0.0,
        },
        "init": {
            "strategy": "xavier_uniform",
            "alpha": 1.0,
            "apply_to": "both",
            "log_base": "e",
        },
        "dim": 64,
        "learning_rate": 0.01,
        "batch_size": 4096,
        "max_epochs": 1000,
        "patience": 10,
        "eval_k": 20,
        "window": "user",
        "seed": 0,
    },
    "experiment": {
        "axis": "none",
        "values": [],
        "seeds": [0],
        "scorers": ["dot", "cosine"],
        "jobs": 1,
        "out_dir": "runs",
        "lr_grid": list(LEARNING_RATE_GRID),
        "lambda_grid": list(WEIGHT_DECAY_GRID),
        "gamma_grid": [],
    },
}

# サポートされている損失関数
SUPPORTED_LOSSES: List[str] = ["BPR", "SSM", "DirectAU", "MAWU"]

# 角度ベース損失 (行ごとの正のスケーリングで値が変わらない)
ANGLE_BASED_LOSSES: List[str] = ["SSM", "DirectAU", "MAWU"]

SUPPORTED_DECAY_MODES: List[str] = ["none", "full", "batched"]

SUPPORTED_INIT_STRATEGIES: List[str] = ["xavier_uniform", "prism"]

SUPPORTED_INIT_TARGETS: List[str] = ["items", "users", "both"]

SUPPORTED_SCORERS: List[str] = ["dot", "cosine"]

SUPPORTED_SWEEP_AXES: List[str] = ["lambda", "alpha", "none"]

# user: K = min(K_cap, N(u)) でDCG/IDCGとも打ち切る
# cap:  K_capまで取得し、IDCGのみN(u)で打ち切る
SUPPORTED_NDCG_WINDOWS: List[str] = ["user", "cap"]

SUPPORTED_REDUCTIONS: List[str] = ["sum", "mean"]

# 損失ごとのバッチサイズ (メモリに収まる最大値の目安)
DEFAULT_BATCH_SIZES: Dict[str, int] = {
    "BPR": 16384,
    "SSM": 16384,
    "DirectAU": 4096,
    "MAWU": 4096,
}

# 人気度の層別カットオフ (上位5%がpopular、上位20%までがneutral)
POPULAR_FRACTION = 0.05
NEUTRAL_CUMULATIVE_FRACTION = 0.20

STRATA: List[str] = ["popular", "neutral", "unpopular"]

# CSV出力時の浮動小数点書式 (64bit浮動小数点の往復に十分な17桁)
FLOAT_FORMAT = "%.17g"

# 成果物ファイル名
MODEL_USERS_FILE = "users.prsm"
MODEL_ITEMS_FILE = "items.prsm"
MODEL_MARGINS_FILE = "margins.csv"
MODEL_PROVENANCE_FILE = "provenance.txt"
MODEL_BEST_DIR = "best"
EPOCH_LOG_FILE = "epoch_log.csv"
METRICS_FILE = "metrics.csv"
SWEEP_FILE = "sweep.csv"
COMPARE_FILE = "compare.csv"
SUMMARY_FILE = "summary.md"

TEMPLATE_PATHS: Dict[str, str] = {
    "sweep_summary": "sweep_summary.md.j2",
    "compare_summary": "compare_summary.md.j2",
}

# 設定ファイル名
CONFIG_FILE_NAME = ".prism-forge.yml"


def get_template_dir() -> Path:
    """テンプレートディレクトリのパスを取得"""
    return Path(__file__).parent.parent / "templates"


def get_config_path(project_dir: Optional[Path] = None) -> Path:
    """設定ファイルのパスを取得"""
    if project_dir is None:
        project_dir = Path.cwd()
    return project_dir / CONFIG_FILE_NAME
