"""テスト共通のフィクスチャ"""

from typing import Iterable, Tuple

import numpy as np
import pytest

from prism_forge.data.interactions import IdMaps, InteractionSet, SplitData, generate_synthetic, prepare_splits
from prism_forge.losses.base import LossSpec
from prism_forge.training.trainer import TrainConfig


def make_interactions(n_users: int, n_items: int, pairs: Iterable[Tuple[int, int]]) -> InteractionSet:
    """連番IDのペアから InteractionSet を作る"""
    pairs = list(pairs)
    return InteractionSet(
        n_users=n_users,
        n_items=n_items,
        users=np.array([u for u, _ in pairs], dtype=np.int64),
        items=np.array([i for _, i in pairs], dtype=np.int64),
        id_maps=IdMaps(tuple(f"u{u}" for u in range(n_users)), tuple(f"i{i}" for i in range(n_items))),
    )


@pytest.fixture
def small_data() -> SplitData:
    interactions = generate_synthetic(60, 40, 900, 1.0, seed=0)
    return prepare_splits(interactions, (0.8, 0.1, 0.1), seed=0)


@pytest.fixture
def tiny_config() -> TrainConfig:
    return TrainConfig(
        loss=LossSpec(kind="DirectAU", reduction="mean"),
        dim=8,
        learning_rate=0.05,
        batch_size=128,
        max_epochs=3,
        patience=2,
        eval_k=10,
    )


@pytest.fixture
def synthetic_args():
    """CLIで小さな合成データを使うための --set 引数"""
    return [
        "--set", "dataset.synthetic.n_users=50",
        "--set", "dataset.synthetic.n_items=30",
        "--set", "dataset.synthetic.n_edges=600",
        "--set", "train.eval_k=10",
        "--set", "train.patience=2",
    ]
