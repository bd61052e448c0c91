"""コマンドモジュール"""

from .compare import compare_command
from .correlate import correlate_command
from .evaluate import evaluate_command
from .init import init_command
from .sweep import sweep_command
from .synth import synth_command
from .theory import theory_command
from .train import train_command

__all__ = [
    "compare_command",
    "correlate_command",
    "evaluate_command",
    "init_command",
    "sweep_command",
    "synth_command",
    "theory_command",
    "train_command",
]
