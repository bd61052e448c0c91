"""学習ループとモデル保存のテスト"""

import functools
import math

import numpy as np
import pytest

from prism_forge.data.interactions import SplitData, generate_synthetic, prepare_splits
from prism_forge.embeddings.table import InitSpec
from prism_forge.exceptions import ConfigError, DivergenceError
from prism_forge.losses.base import DecaySpec, GradientBuffer, LossSpec
from prism_forge.training import (
    EPOCH_LOG_COLUMNS,
    EpochLog,
    TrainConfig,
    epochs_to_convergence,
    initial_tables,
    load_model,
    read_epoch_log,
    save_model,
    train,
    write_epoch_log,
)
from prism_forge.training.trainer import EpochRecord

from .conftest import make_interactions


def _zero_loss(dim):
    def fake(spec, batch, users, items, margins=None):
        return 0.0, GradientBuffer.empty(dim)

    return fake


def _with_decay(config: TrainConfig, mode: str, lam: float) -> TrainConfig:
    return config.evolve(loss=LossSpec(kind=config.loss.kind, reduction="mean", decay=DecaySpec(mode, lam)))


def _grid_data() -> SplitData:
    # アイテム5とユーザー5はどのエッジにも現れない
    pairs = [(u, i) for u in range(5) for i in range(5)] + [(u, (u + 1) % 5) for u in range(5)]
    return prepare_splits(make_interactions(6, 6, sorted(set(pairs))), (0.8, 0.1, 0.1), seed=0)


class TestTrainConfig:
    def test_zero_epochs_returns_initial_tables(self, small_data, tiny_config):
        config = tiny_config.evolve(max_epochs=0)
        users, items = initial_tables(config, small_data)

        model, log = train(config, small_data)

        assert len(log) == 0 and model.epochs_run == 0
        np.testing.assert_array_equal(model.users.values, users.values)
        np.testing.assert_array_equal(model.items.values, items.values)

    @pytest.mark.parametrize(
        "changes",
        [{"learning_rate": 0.0}, {"patience": 0}, {"max_epochs": -1}, {"batch_size": 0}, {"window": "full"}],
    )
    def test_invalid(self, tiny_config, changes):
        with pytest.raises(ConfigError):
            tiny_config.evolve(**changes)

    def test_destructive_decay_mentions_key(self, tiny_config):
        with pytest.raises(ConfigError, match="train.decay.lambda"):
            _with_decay(tiny_config.evolve(learning_rate=0.5), "full", 4.0)

    def test_hash_is_stable(self, tiny_config):
        assert tiny_config.config_hash() == tiny_config.evolve().config_hash()
        assert tiny_config.config_hash() != tiny_config.evolve(seed=1).config_hash()


class TestWeightDecayInLoop:
    def test_full_decay_shrinks_every_row(self, mocker, small_data, tiny_config):
        config = _with_decay(tiny_config.evolve(max_epochs=1), "full", 0.5)
        mocker.patch("prism_forge.training.trainer.compute_loss", side_effect=_zero_loss(config.dim))
        users, items = initial_tables(config, small_data)
        n_batches = math.ceil(len(small_data.train) / config.batch_size)

        model, _ = train(config, small_data)

        factor = (1 - config.learning_rate * 0.5) ** n_batches
        np.testing.assert_allclose(model.items.values, items.values * factor, rtol=1e-12)
        np.testing.assert_allclose(model.users.values, users.values * factor, rtol=1e-12)

    def test_batched_decay_skips_absent_rows(self, mocker, tiny_config):
        data = _grid_data()
        config = _with_decay(tiny_config.evolve(max_epochs=2, batch_size=4, eval_k=3), "batched", 0.5)
        mocker.patch("prism_forge.training.trainer.compute_loss", side_effect=_zero_loss(config.dim))
        users, items = initial_tables(config, data)

        model, _ = train(config, data)

        untouched = data.popularity.degree == 0
        assert untouched[5]
        np.testing.assert_array_equal(model.items.values[untouched], items.values[untouched])
        np.testing.assert_array_equal(model.users.values[5], users.values[5])
        assert not np.array_equal(model.items.values[~untouched], items.values[~untouched])

    def test_no_decay_keeps_tables(self, mocker, small_data, tiny_config):
        config = tiny_config.evolve(max_epochs=2)
        mocker.patch("prism_forge.training.trainer.compute_loss", side_effect=_zero_loss(config.dim))
        _, items = initial_tables(config, small_data)

        model, _ = train(config, small_data)

        np.testing.assert_array_equal(model.items.values, items.values)

    def test_trailing_single_edge_batch_is_decayed(self, mocker, tiny_config):
        data = _grid_data()
        config = _with_decay(tiny_config.evolve(max_epochs=1, batch_size=len(data.train) - 1, eval_k=3), "full", 0.5)
        loss = mocker.patch("prism_forge.training.trainer.compute_loss", side_effect=_zero_loss(config.dim))
        users, items = initial_tables(config, data)

        model, _ = train(config, data)

        # 1エッジのバッチは損失を呼ばないが減衰はかかる
        assert loss.call_count == 1
        factor = (1 - config.learning_rate * 0.5) ** 2
        np.testing.assert_allclose(model.items.values, items.values * factor, rtol=1e-12)
        np.testing.assert_allclose(model.users.values, users.values * factor, rtol=1e-12)

    def test_single_edge_batches_still_decay(self, tiny_config):
        data = _grid_data()
        config = _with_decay(tiny_config.evolve(learning_rate=0.1, max_epochs=1, batch_size=1, eval_k=3), "full", 0.5)
        users, items = initial_tables(config, data)

        model, _ = train(config, data)

        factor = 0.95 ** len(data.train)
        np.testing.assert_allclose(model.items.values, items.values * factor, rtol=1e-9)
        np.testing.assert_allclose(model.users.values, users.values * factor, rtol=1e-9)


class TestEarlyStopping:
    def test_patience(self, mocker, small_data, tiny_config):
        scores = iter([0.1, 0.3, 0.2, 0.25, 0.29, 0.5, 0.6])
        mocker.patch(
            "prism_forge.training.trainer._validate",
            side_effect=lambda *args: {"dot": next(scores), "cosine": 0.0},
        )
        config = tiny_config.evolve(max_epochs=20, patience=3)

        model, log = train(config, small_data)

        assert model.best_epoch == 2
        assert model.epochs_run == 5
        assert epochs_to_convergence(log) == 2

    def test_best_snapshot_differs_from_final(self, mocker, small_data, tiny_config):
        scores = iter([0.5, 0.1, 0.1])
        mocker.patch(
            "prism_forge.training.trainer._validate",
            side_effect=lambda *args: {"dot": next(scores), "cosine": 0.0},
        )
        model, _ = train(tiny_config.evolve(max_epochs=3, patience=5), small_data)

        assert model.best_epoch == 1
        assert not np.array_equal(model.best_items.values, model.items.values)

    def test_empty_validation_uses_last_epoch(self, tiny_config):
        pairs = [(u, i) for u in range(10) for i in range(8) if (u + i) % 3]
        data = prepare_splits(make_interactions(10, 8, pairs), (0.9, 0.0, 0.1), seed=0)
        assert len(data.val) == 0

        model, log = train(tiny_config.evolve(max_epochs=3, eval_k=3), data)

        assert model.best_epoch == 3
        assert all(math.isnan(r.val_ndcg_dot) for r in log.records)


class TestTraining:
    def test_deterministic(self, small_data, tiny_config):
        first, first_log = train(tiny_config, small_data)
        second, second_log = train(tiny_config, small_data)

        np.testing.assert_array_equal(first.items.values, second.items.values)
        np.testing.assert_array_equal(first.users.values, second.users.values)
        columns = [c for c in EPOCH_LOG_COLUMNS if c != "seconds"]
        assert first_log.to_frame()[columns].equals(second_log.to_frame()[columns])

    def test_log_columns_and_callback(self, small_data, tiny_config):
        seen = []
        _, log = train(tiny_config, small_data, on_epoch=seen.append)

        assert list(log.to_frame().columns) == EPOCH_LOG_COLUMNS
        assert [r.epoch for r in seen] == list(range(1, len(log) + 1))
        assert all(r.mag_popular > 0 for r in log.records)

    def test_nan_loss_diverges(self, mocker, small_data, tiny_config):
        mocker.patch(
            "prism_forge.training.trainer.compute_loss",
            return_value=(float("nan"), GradientBuffer.empty(tiny_config.dim)),
        )
        with pytest.raises(DivergenceError):
            train(tiny_config, small_data)

    def test_mawu_margins_stay_in_range(self, small_data, tiny_config):
        config = tiny_config.evolve(loss=LossSpec(kind="MAWU", reduction="mean"), learning_rate=0.5, max_epochs=2)

        model, _ = train(config, small_data)

        for values in (model.margins.user, model.margins.item):
            assert np.all(values >= 0.0) and np.all(values <= np.pi / 2)

    @pytest.mark.parametrize("kind", ["BPR", "SSM"])
    def test_sampled_losses_run(self, small_data, tiny_config, kind):
        config = tiny_config.evolve(loss=LossSpec(kind=kind, n_negatives=2, reduction="mean"), max_epochs=1)
        model, log = train(config, small_data)
        assert len(log) == 1 and np.isfinite(log.records[0].train_loss)

    def test_prism_init_items(self, small_data, tiny_config):
        config = tiny_config.evolve(init=InitSpec(strategy="prism", alpha=1.0), max_epochs=0)
        model, _ = train(config, small_data)

        expected = np.log(small_data.popularity.degree + 2.0)
        np.testing.assert_allclose(np.linalg.norm(model.items.values, axis=1), expected, atol=1e-12)

    def test_empty_train(self, tiny_config):
        empty = make_interactions(2, 2, [])
        data = SplitData(empty, empty, empty, None, None)
        with pytest.raises(ConfigError):
            train(tiny_config, data)


@functools.lru_cache(maxsize=None)
def _power_law_data() -> SplitData:
    return prepare_splits(generate_synthetic(300, 300, 3000, 1.0, seed=0), (0.8, 0.1, 0.1), seed=0)


@functools.lru_cache(maxsize=None)
def _popularity_gaps(mode: str, lam: float, seed: int) -> np.ndarray:
    """エポックごとの mag_popular − mag_unpopular (α=0 のPRISMで初期ノルムはすべて1)"""
    config = TrainConfig(
        loss=LossSpec(kind="DirectAU", decay=DecaySpec(mode, lam)),
        init=InitSpec(strategy="prism", alpha=0.0),
        dim=8,
        learning_rate=1e-3,
        batch_size=16,
        max_epochs=20,
        patience=20,
        eval_k=10,
        seed=seed,
    )
    _, log = train(config, _power_law_data())
    assert len(log) == config.max_epochs
    return np.array([r.mag_popular - r.mag_unpopular for r in log.records])


class TestPopularityEncoding:
    SEEDS = range(5)

    def test_initial_gap_is_zero(self):
        config = TrainConfig(init=InitSpec(strategy="prism", alpha=0.0), dim=8)
        _, items = initial_tables(config, _power_law_data())
        np.testing.assert_allclose(np.linalg.norm(items.values, axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_full_decay_encodes_popularity(self, seed):
        full = _popularity_gaps("full", 1.0, seed)
        none = _popularity_gaps("none", 0.0, seed)

        assert full[-1] > 0.02
        assert full[-1] > full[0]
        assert full[-1] > none[-1] + 0.02

    @pytest.mark.parametrize("seed", SEEDS)
    def test_without_decay_gap_stays_small(self, seed):
        assert np.abs(_popularity_gaps("none", 0.0, seed)).max() < 0.015

    @pytest.mark.parametrize("seed", SEEDS)
    def test_batched_decay_shrinks_popular_rows_first(self, seed):
        # 頻繁にバッチに入る行ほど多く縮む
        batched = _popularity_gaps("batched", 1.0, seed)

        assert batched[-1] < 0.0
        assert batched[-1] < _popularity_gaps("full", 1.0, seed)[-1]


class TestPersistence:
    def test_round_trip(self, tmp_path, small_data, tiny_config):
        model, _ = train(tiny_config.evolve(max_epochs=1), small_data)

        save_model(model, tmp_path / "model", extra={"experiment_hash": "abc"})
        loaded = load_model(tmp_path / "model")
        best = load_model(tmp_path / "model", best=True)

        assert loaded.items.values.tobytes() == model.items.values.tobytes()
        assert best.users.values.tobytes() == model.best_users.values.tobytes()
        assert loaded.margins is None
        assert loaded.provenance["config_hash"] == tiny_config.evolve(max_epochs=1).config_hash()
        assert loaded.provenance["experiment_hash"] == "abc"

    def test_margins_are_saved(self, tmp_path, small_data, tiny_config):
        config = tiny_config.evolve(loss=LossSpec(kind="MAWU", reduction="mean"), max_epochs=1)
        model, _ = train(config, small_data)

        save_model(model, tmp_path / "model")
        loaded = load_model(tmp_path / "model")

        np.testing.assert_allclose(loaded.margins.item, model.margins.item, rtol=1e-15)

    def test_epoch_log_round_trip(self, tmp_path):
        log = EpochLog([EpochRecord(1, 2.5, 0.1, 0.2, 1.5, 1.0, 0.5, 0.01), EpochRecord(2, 2.0, 0.3, 0.2, 1.6, 1.0, 0.4, 0.01)])
        path = tmp_path / "epochs.csv"

        write_epoch_log(log, path)
        loaded = read_epoch_log(path)

        assert loaded.records == log.records
        assert loaded.best_epoch == 2
