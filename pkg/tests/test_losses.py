"""ランキング損失・勾配・重み減衰のテスト"""

import math

import numpy as np
import pytest

from prism_forge.data.interactions import Batch
from prism_forge.exceptions import ConfigError, DegenerateInputError
from prism_forge.losses import (
    LossSpec,
    MarginTable,
    apply_weight_decay,
    bpr,
    check_scale_invariance,
    clamp_margins,
    compute_loss,
    decay_factor,
    directau,
    is_angle_based,
)

N_USERS, N_ITEMS, DIM = 4, 6, 3

# 小さなランダム問題の数と大きさ (正例は最大8件、次元は最大8)
N_RANDOM_BATCHES = 100
RANDOM_USERS, RANDOM_ITEMS = 6, 10
MAX_POSITIVES, MAX_DIM = 8, 8
# arccos の微分は |cos| → 1 で発散する
MAX_ABS_COS = 0.99


def _batch(gamma: int) -> Batch:
    rng = np.random.default_rng(1)
    return Batch(
        users=np.array([0, 1, 2, 1]),
        items=np.array([0, 1, 2, 3]),
        negatives=rng.integers(0, N_ITEMS, size=(4, gamma)),
    )


def _tables(seed: int = 0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((N_USERS, DIM)), rng.standard_normal((N_ITEMS, DIM))


def _rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    directions = rng.standard_normal((n, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * rng.uniform(0.5, 2.0, size=(n, 1))


def _random_case(seed: int, gamma: int):
    """シードから (batch, users, items, margins) を作る"""
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, MAX_DIM + 1))
    while True:
        n_positives = int(rng.integers(2, MAX_POSITIVES + 1))
        batch = Batch(
            users=rng.integers(0, RANDOM_USERS, size=n_positives),
            items=rng.integers(0, RANDOM_ITEMS, size=n_positives),
            negatives=rng.integers(0, RANDOM_ITEMS, size=(n_positives, gamma)),
        )
        users = _rows(rng, RANDOM_USERS, dim)
        items = _rows(rng, RANDOM_ITEMS, dim)
        u_hat = users[batch.users] / np.linalg.norm(users[batch.users], axis=1, keepdims=True)
        i_hat = items[batch.items] / np.linalg.norm(items[batch.items], axis=1, keepdims=True)
        cos = np.sum(u_hat * i_hat, axis=1)
        if (
            np.unique(batch.users).shape[0] >= 2
            and np.unique(batch.items).shape[0] >= 2
            and np.max(np.abs(cos)) < MAX_ABS_COS
        ):
            break
    margins = MarginTable(rng.uniform(0.0, 0.3, RANDOM_USERS), rng.uniform(0.0, 0.3, RANDOM_ITEMS))
    return batch, users, items, margins


def _numeric_gradient(fn, values: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(values)
    for index in np.ndindex(values.shape):
        original = values[index]
        values[index] = original + h
        plus = fn()
        values[index] = original - h
        minus = fn()
        values[index] = original
        grad[index] = (plus - minus) / (2 * h)
    return grad


LOSS_CASES = [
    (LossSpec(kind="BPR"), 2),
    (LossSpec(kind="SSM", temperature=0.5), 3),
    (LossSpec(kind="DirectAU", gamma_uniformity=0.7), 0),
    (LossSpec(kind="DirectAU", reduction="mean"), 0),
    (LossSpec(kind="MAWU", gamma_user=0.5, gamma_item=1.5), 0),
]


class TestGradients:
    @pytest.mark.parametrize("spec,gamma", LOSS_CASES, ids=lambda c: getattr(c, "kind", str(c)))
    def test_matches_finite_differences(self, spec, gamma):
        for seed in range(N_RANDOM_BATCHES):
            batch, users, items, margins = _random_case(seed, gamma)
            margins = margins if spec.kind == "MAWU" else None

            _, grads = compute_loss(spec, batch, users, items, margins)

            def loss():
                return compute_loss(spec, batch, users, items, margins)[0]

            np.testing.assert_allclose(
                grads.dense_users(RANDOM_USERS), _numeric_gradient(loss, users), rtol=1e-5, atol=1e-8,
                err_msg=f"seed={seed}",
            )
            np.testing.assert_allclose(
                grads.dense_items(RANDOM_ITEMS), _numeric_gradient(loss, items), rtol=1e-5, atol=1e-8,
                err_msg=f"seed={seed}",
            )

    def test_mawu_margin_gradients(self):
        spec = LossSpec(kind="MAWU")
        for seed in range(N_RANDOM_BATCHES):
            batch, users, items, margins = _random_case(seed, 0)

            _, grads = compute_loss(spec, batch, users, items, margins)

            def loss():
                return compute_loss(spec, batch, users, items, margins)[0]

            numeric_users = _numeric_gradient(loss, margins.user)
            numeric_items = _numeric_gradient(loss, margins.item)
            np.testing.assert_allclose(
                grads.user_margin_grad, numeric_users[grads.user_index], rtol=1e-5, atol=1e-8, err_msg=f"seed={seed}"
            )
            np.testing.assert_allclose(
                grads.item_margin_grad, numeric_items[grads.item_index], rtol=1e-5, atol=1e-8, err_msg=f"seed={seed}"
            )

    def test_indices_are_unique_and_sorted(self):
        users, items = _tables()
        _, grads = bpr(_batch(3), users, items)

        assert np.all(np.diff(grads.user_index) > 0)
        assert np.all(np.diff(grads.item_index) > 0)


class TestLossValues:
    def test_bpr_hand_value(self):
        batch = Batch(np.array([0]), np.array([0]), np.array([[1]]))
        users = np.array([[1.0, 0.0]])
        items = np.array([[1.0, 0.0], [0.0, 1.0]])

        loss, _ = bpr(batch, users, items)

        assert loss == pytest.approx(math.log1p(math.exp(-1.0)), abs=1e-12)

    def test_bpr_requires_negatives(self):
        users, items = _tables()
        with pytest.raises(ConfigError):
            bpr(_batch(0), users, items)

    def test_mean_reduction_divides_by_batch(self):
        users, items = _tables()
        batch = _batch(2)
        total, _ = compute_loss(LossSpec(kind="SSM"), batch, users, items)
        mean, _ = compute_loss(LossSpec(kind="SSM", reduction="mean"), batch, users, items)
        assert mean == pytest.approx(total / len(batch))

    def test_directau_needs_two_entities(self):
        users, items = _tables()
        batch = Batch(np.array([0, 0]), np.array([1, 2]), np.empty((2, 0), dtype=np.int64))
        with pytest.raises(DegenerateInputError):
            directau(batch, users, items)

    def test_zero_norm_row(self):
        users, items = _tables()
        items[0] = 0.0
        with pytest.raises(DegenerateInputError):
            compute_loss(LossSpec(kind="SSM"), _batch(2), users, items)


def _scale_change(kind: str, seed: int) -> float:
    gamma = {"BPR": 2, "SSM": 2}.get(kind, 0)
    batch, users, items, margins = _random_case(seed, gamma)
    rng = np.random.default_rng(10_000 + seed)
    return check_scale_invariance(
        LossSpec(kind=kind), batch, users, items,
        rng.uniform(0.1, 10.0, RANDOM_USERS), rng.uniform(0.1, 10.0, RANDOM_ITEMS),
        margins if kind == "MAWU" else None,
    )


class TestAngleBased:
    @pytest.mark.parametrize("kind", ["SSM", "DirectAU", "MAWU"])
    def test_invariant_under_row_scaling(self, kind):
        diffs = [_scale_change(kind, seed) for seed in range(N_RANDOM_BATCHES)]

        assert is_angle_based(kind)
        assert max(diffs) <= 1e-9

    def test_bpr_is_not_invariant(self):
        diffs = np.array([_scale_change("BPR", seed) for seed in range(N_RANDOM_BATCHES)])

        assert not is_angle_based("BPR")
        assert np.count_nonzero(diffs > 1e-3) >= 90

    def test_gradient_is_tangent(self):
        users, items = _tables()
        _, grads = compute_loss(LossSpec(kind="DirectAU"), _batch(0), users, items)

        radial = np.sum(grads.item_grad * items[grads.item_index], axis=1)
        np.testing.assert_allclose(radial, 0.0, atol=1e-12)


class TestWeightDecay:
    def test_full_scales_every_row(self):
        users, items = _tables()
        before_users, before_items = users.copy(), items.copy()

        apply_weight_decay(users, items, eta=0.1, lam=0.5, mode="full")

        np.testing.assert_array_equal(users, before_users * 0.95)
        np.testing.assert_array_equal(items, before_items * 0.95)

    def test_batched_leaves_absent_rows_untouched(self):
        users, items = _tables()
        before_users, before_items = users.copy(), items.copy()
        batch = Batch(np.array([0, 1]), np.array([0, 1]), np.array([[2], [2]]))

        apply_weight_decay(users, items, eta=0.1, lam=0.5, mode="batched", batch=batch)

        np.testing.assert_array_equal(users[2:], before_users[2:])
        np.testing.assert_array_equal(items[3:], before_items[3:])
        np.testing.assert_array_equal(items[:3], before_items[:3] * 0.95)

    def test_none_and_zero_lambda(self):
        users, items = _tables()
        before = users.copy()
        apply_weight_decay(users, items, eta=0.1, lam=0.5, mode="none")
        apply_weight_decay(users, items, eta=0.1, lam=0.0, mode="full")
        np.testing.assert_array_equal(users, before)

    def test_destructive_product(self):
        with pytest.raises(ConfigError):
            decay_factor(1.0, 1.0)


class TestMargins:
    def test_clamp(self):
        margins = MarginTable(np.array([-0.5, 0.3, 4.0]), np.array([2.0]))
        clamp_margins(margins)

        np.testing.assert_array_equal(margins.user, [0.0, 0.3, np.pi / 2])
        np.testing.assert_array_equal(margins.item, [np.pi / 2])
