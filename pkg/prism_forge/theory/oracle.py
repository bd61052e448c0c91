"""
モンテカルロによる閉形式の検証とヒートマップグリッド
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigError, DegenerateInputError
from .closed_form import TheoryParams, cosine_ascent_step, expected_magnitude_change

logger = logging.getLogger(__name__)

MIN_TRIALS = 1000
TRIAL_CHUNK = 10_000

# 内積項を0.9に固定する慣例 (cos² = 0.81)
HEATMAP_COS_SQ = 0.81
DEFAULT_HEATMAP_DEGREES: Sequence[float] = np.unique(np.round(np.geomspace(1, 1000, 13))).tolist()
DEFAULT_HEATMAP_BATCH_FRACTIONS: Sequence[float] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
DEFAULT_ORACLE_DEGREES: Sequence[float] = [1, 3, 10, 30, 100]
DEFAULT_ORACLE_BATCH_FRACTIONS: Sequence[float] = [0.001, 0.005, 0.01, 0.02, 0.05]

HEATMAP_COLUMNS = ["degree", "batch_fraction", "closed_form"]
ORACLE_COLUMNS = ["degree", "batch_fraction", "closed_form", "mc_mean", "mc_stderr", "z"]

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class MagnitudeTrace:
    """シミュレーション1回分の結果

    before は各試行の更新前 ||i||²、after は更新後 ||i||²。
    """

    before: np.ndarray
    after: np.ndarray
    in_batch: np.ndarray

    def __post_init__(self) -> None:
        for name in ("before", "after"):
            values = getattr(self, name)
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise DegenerateInputError(f"{name} に有限でない値か負の値があります")

    @property
    def n_trials(self) -> int:
        return int(self.after.shape[0])

    @property
    def deltas(self) -> np.ndarray:
        return self.after - self.before

    @property
    def mean_change(self) -> float:
        return float(self.deltas.mean())

    @property
    def stderr(self) -> float:
        return float(self.deltas.std(ddof=1) / math.sqrt(self.n_trials))

    @property
    def inclusion_frequency(self) -> float:
        return float(self.in_batch.mean())

    def z_score(self, expected: float) -> float:
        """(経験平均 − expected) / 標準誤差 (標準誤差0なら一致で0)"""
        diff = self.mean_change - expected
        if self.stderr == 0:
            return 0.0 if abs(diff) <= 1e-15 else math.copysign(math.inf, diff)
        return diff / self.stderr


def _sample_pairs(
    rng: np.random.Generator, n: int, dim: int, cos_sq: float, sq_mag: float
) -> Tuple[np.ndarray, np.ndarray]:
    """u を球面一様に引き、cos² がちょうど cos_sq になる i を作る"""
    u = rng.standard_normal((n, dim))
    u_unit = u / np.linalg.norm(u, axis=1, keepdims=True)

    if dim >= 2:
        r = rng.standard_normal((n, dim))
        v = r - np.sum(r * u_unit, axis=1, keepdims=True) * u_unit
        v_unit = v / np.linalg.norm(v, axis=1, keepdims=True)
    else:
        v_unit = np.zeros_like(u_unit)

    sign = rng.integers(0, 2, size=(n, 1)) * 2 - 1
    cos = sign * math.sqrt(cos_sq)
    sin = math.sqrt(max(0.0, 1.0 - cos_sq))
    i = (cos * u_unit + sin * v_unit) * math.sqrt(sq_mag)
    return u, i


def monte_carlo_magnitude(
    p: TheoryParams, dim: int, trials: int, seed: SeedLike = 0
) -> MagnitudeTrace:
    """全行減衰のSGD 1ステップを繰り返し、||i||² の変化を記録

    各試行で d_i 本のエッジがそれぞれ確率 |B|/|E| でバッチに入り、
    1本でも入ればコサイン上昇 + 減衰、入らなければ減衰のみ。
    乱数は TRIAL_CHUNK 試行ごとに (seed, チャンク番号) から独立に作る。
    """
    if trials < MIN_TRIALS:
        raise ConfigError(f"trials は {MIN_TRIALS} 以上が必要です: {trials}")
    if dim < 1:
        raise ConfigError(f"dim は1以上が必要です: {dim}")
    if dim < 2 and p.cos_sq < 1.0:
        raise DegenerateInputError("dim < 2 では cos² < 1 のベクトル対を作れません")
    if p.degree != int(p.degree):
        raise ConfigError(f"モンテカルロには整数の次数が必要です: {p.degree}")

    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = math.ceil(trials / TRIAL_CHUNK)
    before, after, in_batch = [], [], []
    for index, child in enumerate(sequence.spawn(n_chunks)):
        rng = np.random.default_rng(child)
        n = min(TRIAL_CHUNK, trials - index * TRIAL_CHUNK)
        u, i = _sample_pairs(rng, n, dim, p.cos_sq, p.exp_sq_mag)
        hit = rng.binomial(int(p.degree), p.batch_fraction, size=n) > 0
        stepped = cosine_ascent_step(i, u, p.eta, p.lam, hit)
        before.append(np.sum(i * i, axis=1))
        after.append(np.sum(stepped * stepped, axis=1))
        in_batch.append(hit)

    trace = MagnitudeTrace(np.concatenate(before), np.concatenate(after), np.concatenate(in_batch))
    logger.debug(
        "monte carlo: d=%s bfrac=%s mean=%.6e stderr=%.3e",
        p.degree, p.batch_fraction, trace.mean_change, trace.stderr,
    )
    return trace


def _require_nonempty(name: str, values: Sequence[float]) -> None:
    if len(values) == 0:
        raise ConfigError(f"{name} が空です")


def heatmap_grid(
    d_range: Sequence[float] = DEFAULT_HEATMAP_DEGREES,
    bfrac_range: Sequence[float] = DEFAULT_HEATMAP_BATCH_FRACTIONS,
    eta: float = 0.01,
    lam: float = 1e-6,
    cos_sq: float = HEATMAP_COS_SQ,
    exp_sq_mag: float = 1.0,
) -> pd.DataFrame:
    """(次数, バッチ比) の各セルの期待変化量 (縦持ち)"""
    _require_nonempty("d_range", d_range)
    _require_nonempty("bfrac_range", bfrac_range)
    rows = []
    for degree in d_range:
        for fraction in bfrac_range:
            params = TheoryParams.with_batch_fraction(
                float(fraction), eta=eta, lam=lam, degree=float(degree), cos_sq=cos_sq, exp_sq_mag=exp_sq_mag
            )
            rows.append(
                {
                    "degree": float(degree),
                    "batch_fraction": float(fraction),
                    "closed_form": expected_magnitude_change(params),
                }
            )
    return pd.DataFrame(rows, columns=HEATMAP_COLUMNS)


def heatmap_matrix(grid: pd.DataFrame) -> pd.DataFrame:
    """縦持ちのグリッドを 次数 × バッチ比 の行列にする"""
    return grid.pivot(index="degree", columns="batch_fraction", values="closed_form")


def oracle_grid(
    d_range: Sequence[float] = DEFAULT_ORACLE_DEGREES,
    bfrac_range: Sequence[float] = DEFAULT_ORACLE_BATCH_FRACTIONS,
    eta: float = 0.01,
    lam: float = 1e-6,
    cos_sq: float = HEATMAP_COS_SQ,
    exp_sq_mag: float = 1.0,
    dim: int = 8,
    trials: int = 100_000,
    seed: int = 0,
    progress: Optional[Callable[[], None]] = None,
) -> pd.DataFrame:
    """各セルで閉形式とモンテカルロを比較し z スコアを付ける"""
    _require_nonempty("d_range", d_range)
    _require_nonempty("bfrac_range", bfrac_range)
    cells = [(float(d), float(b)) for d in d_range for b in bfrac_range]
    rows = []
    for (degree, fraction), child in zip(cells, np.random.SeedSequence(seed).spawn(len(cells))):
        params = TheoryParams.with_batch_fraction(
            fraction, eta=eta, lam=lam, degree=degree, cos_sq=cos_sq, exp_sq_mag=exp_sq_mag
        )
        expected = expected_magnitude_change(params)
        trace = monte_carlo_magnitude(params, dim, trials, child)
        rows.append(
            {
                "degree": degree,
                "batch_fraction": fraction,
                "closed_form": expected,
                "mc_mean": trace.mean_change,
                "mc_stderr": trace.stderr,
                "z": trace.z_score(expected),
            }
        )
        if progress is not None:
            progress()
    return pd.DataFrame(rows, columns=ORACLE_COLUMNS)
