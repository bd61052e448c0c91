"""レポート生成モジュール"""

from .report_generator import ReportGenerator

__all__ = ["ReportGenerator"]
