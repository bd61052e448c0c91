"""
Markdownサマリー生成器
"""

import math
from typing import Any, Dict, List, Sequence

import pandas as pd
from jinja2 import Environment, FileSystemLoader

from ..config import TEMPLATE_PATHS, get_template_dir

SUMMARY_METRICS = [
    "ndcg_overall",
    "ndcg_popular",
    "ndcg_neutral",
    "ndcg_unpopular",
    "debias_ratio",
    "epochs_to_convergence",
]


class ReportGenerator:
    """スイープ・比較結果のサマリー生成器"""

    def __init__(self):
        template_dir = get_template_dir()
        self.env = Environment(
            loader=FileSystemLoader(template_dir),
            trim_blocks=True,
            lstrip_blocks=True,
        )

        # カスタムフィルターの追加
        self.env.filters["num"] = self._num
        self.env.filters["pct"] = self._pct
        self.env.filters["mean_std"] = self._mean_std

    def generate_sweep_summary(
        self, sweep: pd.DataFrame, context: Dict[str, Any]
    ) -> str:
        """スイープ結果 (値ごとの平均 ± 標準偏差) のサマリーを生成"""
        template = self.env.get_template(TEMPLATE_PATHS["sweep_summary"])
        ok = sweep[sweep["status"] == "ok"]
        groups = []
        for value, frame in ok.groupby("value", sort=True):
            groups.append(
                {
                    "value": value,
                    "n_seeds": len(frame),
                    "stats": self._stats(frame, SUMMARY_METRICS + ["spearman"]),
                }
            )
        return template.render(
            groups=groups,
            metrics=SUMMARY_METRICS + ["spearman"],
            failed=sweep[sweep["status"] != "ok"].to_dict("records"),
            **context,
        )

    def generate_compare_summary(
        self, compare: pd.DataFrame, context: Dict[str, Any]
    ) -> str:
        """tuned-λ と PRISM の比較サマリーを生成"""
        template = self.env.get_template(TEMPLATE_PATHS["compare_summary"])
        per_seed = compare[compare["seed"].astype(str).str.isdigit()]
        ok = per_seed[per_seed["status"] == "ok"]
        methods = []
        for method, frame in ok.groupby("method", sort=False):
            methods.append({"name": method, "n_seeds": len(frame), "stats": self._stats(frame, SUMMARY_METRICS)})
        diff = compare[compare["seed"].astype(str) == "rel_diff_pct"].to_dict("records")
        return template.render(
            methods=methods,
            metrics=SUMMARY_METRICS,
            rel_diff=diff[0] if diff else None,
            failed=per_seed[per_seed["status"] != "ok"].to_dict("records"),
            **context,
        )

    @staticmethod
    def _stats(frame: pd.DataFrame, columns: Sequence[str]) -> Dict[str, List[float]]:
        stats = {}
        for column in columns:
            values = pd.to_numeric(frame[column], errors="coerce")
            std = float(values.std(ddof=1)) if len(values) > 1 else float("nan")
            stats[column] = [float(values.mean()), std]
        return stats

    @staticmethod
    def _num(value: Any, digits: int = 4) -> str:
        """数値を有効数字 digits 桁で表示"""
        try:
            number = float(value)
        except (TypeError, ValueError):
            return str(value)
        if math.isnan(number):
            return "-"
        return f"{number:.{digits}g}"

    @staticmethod
    def _pct(value: Any) -> str:
        """相対差 (%) を符号付きで表示"""
        try:
            number = float(value)
        except (TypeError, ValueError):
            return str(value)
        if math.isnan(number):
            return "-"
        return f"{number:+.2f}%"

    @classmethod
    def _mean_std(cls, pair: Sequence[float], digits: int = 4) -> str:
        mean, std = pair
        if math.isnan(std):
            return cls._num(mean, digits)
        return f"{cls._num(mean, digits)} ± {cls._num(std, digits)}"
