"""
アイテムノルムの期待変化量 (平均場評価)

1ステップで ||i||² がどれだけ変わるかの閉形式。期待値の中の量
(E[||i||²] と cos²) は与えられた点の値で評価する。

    減衰項:     E[||i||²]·ηλ(ηλ − 2)
    ランキング項: η² / E[||i||²] · (1 − cos²)
"""

from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence, Union

import numpy as np

from ..data.interactions import batch_inclusion_probability, negsample_inclusion_probability
from ..exceptions import ConfigError, DegenerateInputError

VectorLike = Union[np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class TheoryParams:
    """期待変化量の計算に使う記号一式

    batch_size / total_edges は比だけが効くので、比で与えるときは
    `with_batch_fraction` を使う (total_edges=1)。
    """

    eta: float
    lam: float
    batch_size: float
    total_edges: float
    degree: float
    n_items: Optional[float] = None
    gamma: int = 0
    exp_sq_mag: float = 1.0
    cos_sq: float = 0.81

    def __post_init__(self) -> None:
        if self.eta < 0 or self.lam < 0:
            raise ConfigError(f"eta, lambda は0以上が必要です: ({self.eta}, {self.lam})")
        if not 0.0 <= self.cos_sq <= 1.0:
            raise ConfigError(f"cos_sq は [0, 1] の範囲が必要です: {self.cos_sq}")
        if self.exp_sq_mag < 0:
            raise ConfigError(f"exp_sq_mag は正である必要があります: {self.exp_sq_mag}")
        if self.exp_sq_mag == 0:
            raise DegenerateInputError("exp_sq_mag = 0 ではランキング項が定義できません")
        if self.total_edges <= 0 or not 0 <= self.batch_size <= self.total_edges:
            raise ConfigError(
                f"0 <= batch_size <= total_edges が必要です: ({self.batch_size}, {self.total_edges})"
            )
        if self.degree < 0:
            raise ConfigError(f"degree は0以上が必要です: {self.degree}")
        if self.gamma < 0:
            raise ConfigError(f"gamma は0以上が必要です: {self.gamma}")
        if self.n_items is not None and self.n_items <= 0:
            raise ConfigError(f"n_items は正である必要があります: {self.n_items}")

    @classmethod
    def with_batch_fraction(cls, batch_fraction: float, **kwargs: Any) -> "TheoryParams":
        return cls(batch_size=batch_fraction, total_edges=1.0, **kwargs)

    @property
    def batch_fraction(self) -> float:
        return self.batch_size / self.total_edges

    def evolve(self, **changes: Any) -> "TheoryParams":
        return replace(self, **changes)


def inclusion_probability(p: TheoryParams) -> float:
    """P(i ∈ B) = 1 − (1 − |B|/|E|)^{d_i}"""
    return float(batch_inclusion_probability(p.degree, p.batch_size, p.total_edges))


def decay_term(p: TheoryParams) -> float:
    return p.exp_sq_mag * p.eta * p.lam * (p.eta * p.lam - 2.0)


def ranking_term(p: TheoryParams) -> float:
    """コサイン上昇ステップの寄与 (Cauchy-Schwarz より常に0以上)"""
    return p.eta ** 2 / p.exp_sq_mag * (1.0 - p.cos_sq)


def expected_magnitude_change(p: TheoryParams) -> float:
    """全行減衰: 減衰項は常に、ランキング項はバッチに入ったときだけ効く"""
    return decay_term(p) + inclusion_probability(p) * ranking_term(p)


def batched_decay_expected_change(p: TheoryParams) -> float:
    """バッチ内減衰: 両方の項が同じ確率でゲートされる"""
    return inclusion_probability(p) * (decay_term(p) + ranking_term(p))


def negsample_expected_change(p: TheoryParams) -> float:
    """負例サンプリング込みの包含確率 1 − (1 − |B|/|E|)^{d_i}(1 − γ|B|/|I|) を使う"""
    if p.gamma == 0:
        return expected_magnitude_change(p)
    if p.n_items is None:
        raise ConfigError("gamma > 0 のときは n_items が必要です")
    probability = float(
        negsample_inclusion_probability(p.degree, p.batch_size, p.total_edges, p.gamma, p.n_items)
    )
    return decay_term(p) + probability * ranking_term(p)


def dot_update_expected_change(p: TheoryParams, exp_dot: float, exp_u_sq: float) -> float:
    """内積 (またはユークリッド距離) 損失での期待変化量

    ランキング項 2(η − η²λ)·E[u·i] + η²·E[||u||²] は符号が定まらない。
    """
    if exp_u_sq < 0:
        raise ConfigError(f"exp_u_sq は0以上が必要です: {exp_u_sq}")
    ranking = 2.0 * (p.eta - p.eta ** 2 * p.lam) * exp_dot + p.eta ** 2 * exp_u_sq
    return decay_term(p) + inclusion_probability(p) * ranking


def _rows(vector: VectorLike) -> np.ndarray:
    return np.asarray(vector, dtype=np.float64)


def _gate(in_batch: Union[bool, np.ndarray], ndim: int) -> np.ndarray:
    gate = np.asarray(in_batch, dtype=bool)
    return gate[..., None] if ndim > 1 and gate.ndim == ndim - 1 else gate


def euclidean_step(
    i_vec: VectorLike, u_vec: VectorLike, eta: float, lam: float, in_batch: Union[bool, np.ndarray]
) -> np.ndarray:
    """||u − i||² を下る1ステップ

    in_batch: i(1 − 2η − ηλ) + 2ηu、それ以外: i(1 − ηλ)。行列なら行ごと。
    """
    i_vec, u_vec = _rows(i_vec), _rows(u_vec)
    decayed = i_vec * (1.0 - eta * lam)
    updated = i_vec * (1.0 - 2.0 * eta - eta * lam) + 2.0 * eta * u_vec
    return np.where(_gate(in_batch, i_vec.ndim), updated, decayed)


def cosine_ascent_step(
    i_vec: VectorLike, u_vec: VectorLike, eta: float, lam: float, in_batch: Union[bool, np.ndarray]
) -> np.ndarray:
    """cos(u, i) を上る1ステップと減衰: i(1 − ηλ) + η·∇_i cos(u, i)

    ∇_i cos = (û − cos·î) / ||i|| は i に直交する。
    """
    i_vec, u_vec = _rows(i_vec), _rows(u_vec)
    i_norm = np.linalg.norm(i_vec, axis=-1, keepdims=True)
    u_norm = np.linalg.norm(u_vec, axis=-1, keepdims=True)
    if np.any(i_norm == 0) or np.any(u_norm == 0):
        raise DegenerateInputError("ノルム0のベクトルではコサインが定義できません")
    i_unit = i_vec / i_norm
    u_unit = u_vec / u_norm
    cosine = np.sum(i_unit * u_unit, axis=-1, keepdims=True)
    grad = (u_unit - cosine * i_unit) / i_norm

    decayed = i_vec * (1.0 - eta * lam)
    return np.where(_gate(in_batch, i_vec.ndim), decayed + eta * grad, decayed)
