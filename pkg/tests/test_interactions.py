"""インタラクションデータのテスト"""

import numpy as np
import pytest
from scipy import stats

from prism_forge.data.interactions import (
    EpochSampler,
    PopularityIndex,
    batch_inclusion_probability,
    generate_synthetic,
    item_popularity,
    load_id_maps,
    load_interactions,
    negsample_inclusion_probability,
    sample_batch,
    split,
    stratify,
    write_interactions,
)
from prism_forge.exceptions import ConfigError, DataFormatError, DegenerateInputError, EmptyDataError

from .conftest import make_interactions


class TestLoadInteractions:
    def test_deduplicates_and_skips_comments(self, tmp_path):
        path = tmp_path / "ratings.tsv"
        path.write_text("# header\nalice\tx\nbob\ty\n\nalice\tx\nbob\tx\n", encoding="utf-8")

        interactions = load_interactions(path)

        assert len(interactions) == 3
        assert interactions.n_users == 2
        assert interactions.n_items == 2
        assert interactions.id_maps.user_ids == ("alice", "bob")

    def test_loading_concatenated_file_is_idempotent(self, tmp_path):
        once = tmp_path / "once.tsv"
        twice = tmp_path / "twice.tsv"
        body = "a\t1\nb\t2\nc\t1\n"
        once.write_text(body, encoding="utf-8")
        twice.write_text(body + body, encoding="utf-8")

        first = load_interactions(once, persist_id_maps=False)
        second = load_interactions(twice, persist_id_maps=False)
        np.testing.assert_array_equal(first.edges, second.edges)

    def test_value_filter(self, tmp_path):
        path = tmp_path / "ratings.dat"
        path.write_text("1::10::5::978300760\n1::11::3::978302109\n2::10::4::978301968\n", encoding="utf-8")

        interactions = load_interactions(path, delimiter="::", value_column=2, min_value=4, persist_id_maps=False)

        assert len(interactions) == 2
        assert interactions.id_maps.item_ids == ("10",)

    def test_id_maps_are_persisted(self, tmp_path):
        path = tmp_path / "data.tsv"
        path.write_text("u9\ti3\nu1\ti3\n", encoding="utf-8")

        interactions = load_interactions(path)
        maps = load_id_maps(tmp_path, "data")

        assert maps == interactions.id_maps
        assert maps.user_index() == {"u9": 0, "u1": 1}

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a\t1\nonlyone\n", encoding="utf-8")

        with pytest.raises(DataFormatError) as excinfo:
            load_interactions(path, persist_id_maps=False)
        assert excinfo.value.line_number == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("# nothing\n", encoding="utf-8")

        with pytest.raises(EmptyDataError):
            load_interactions(path, persist_id_maps=False)

    def test_write_then_load(self, tmp_path):
        interactions = generate_synthetic(20, 10, 50, 1.0, seed=3)
        path = tmp_path / "synthetic.tsv"
        write_interactions(interactions, path)

        loaded = load_interactions(path, persist_id_maps=False)
        assert len(loaded) == 50


class TestSplit:
    def test_remainder_goes_to_test(self):
        n = 836_478
        interactions = make_interactions(n, 1, ((u, 0) for u in range(n)))

        train, val, test = split(interactions, (0.8, 0.1, 0.1), seed=0)

        assert (len(train), len(val), len(test)) == (669_182, 83_647, 83_649)

    def test_partition_is_disjoint_and_complete(self):
        interactions = generate_synthetic(30, 20, 200, 1.0, seed=1)
        parts = split(interactions, (0.8, 0.1, 0.1), seed=7)

        keys = [set(map(tuple, p.edges.tolist())) for p in parts]
        assert keys[0].isdisjoint(keys[1]) and keys[0].isdisjoint(keys[2]) and keys[1].isdisjoint(keys[2])
        assert set().union(*keys) == set(map(tuple, interactions.edges.tolist()))

    def test_same_seed_same_split(self):
        interactions = generate_synthetic(30, 20, 200, 1.0, seed=1)
        first = split(interactions, (0.8, 0.1, 0.1), seed=5)
        second = split(interactions, (0.8, 0.1, 0.1), seed=5)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.edges, b.edges)

    @pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.8, 0.3, 0.1), (1.2, -0.1, -0.1)])
    def test_invalid_ratios(self, ratios):
        interactions = generate_synthetic(10, 10, 20, 1.0, seed=0)
        with pytest.raises(ConfigError):
            split(interactions, ratios, seed=0)


class TestStrata:
    def test_cutoff_counts(self):
        degree = np.arange(3629)[::-1].copy()
        strata = stratify(PopularityIndex(degree=degree, user_degree=np.zeros(1, dtype=np.int64)))

        assert strata.counts() == {"popular": 182, "neutral": 544, "unpopular": 2903}

    def test_ties_broken_by_index(self):
        strata = stratify(PopularityIndex(degree=np.ones(20, dtype=np.int64), user_degree=np.zeros(1, dtype=np.int64)))

        assert strata.names()[:5] == ["popular", "neutral", "neutral", "neutral", "unpopular"]

    @pytest.mark.parametrize("m", [1, 2, 7, 19, 100])
    def test_counts_cover_all_items(self, m):
        strata = stratify(PopularityIndex(degree=np.arange(m), user_degree=np.zeros(1, dtype=np.int64)))
        assert sum(strata.counts().values()) == m

    def test_popularity_counts_train_only(self):
        train = make_interactions(3, 4, [(0, 0), (1, 0), (2, 0), (0, 3)])
        popularity = item_popularity(train)

        np.testing.assert_array_equal(popularity.degree, [3, 0, 0, 1])
        np.testing.assert_array_equal(popularity.user_degree, [2, 1, 1])


class TestInclusionProbability:
    def test_known_value(self):
        assert batch_inclusion_probability(5, 1, 100) == pytest.approx(0.0490099501, abs=1e-10)

    def test_degree_zero(self):
        assert batch_inclusion_probability(0, 50, 100) == 0.0

    def test_full_batch(self):
        assert batch_inclusion_probability(3, 100, 100) == 1.0

    def test_monotone_and_bounded(self):
        degrees = np.arange(0, 200)
        values = batch_inclusion_probability(degrees, 3, 1000)
        assert np.all(np.diff(values) >= 0)
        assert np.all((values >= 0) & (values <= 1))

    def test_total_edges_zero(self):
        with pytest.raises(DegenerateInputError):
            batch_inclusion_probability(1, 0, 0)

    def test_negsample_known_value(self):
        value = negsample_inclusion_probability(5, 1, 100, gamma=1, n_items=10)
        assert value == pytest.approx(0.14410895509, abs=1e-10)

    def test_negsample_reduces_exactly(self):
        degrees = np.array([0, 1, 5, 40])
        np.testing.assert_array_equal(
            negsample_inclusion_probability(degrees, 7, 300, gamma=0, n_items=50),
            batch_inclusion_probability(degrees, 7, 300),
        )

    def test_negsample_saturates(self):
        assert negsample_inclusion_probability(0, 10, 100, gamma=2, n_items=20) == pytest.approx(1.0)

    @pytest.mark.parametrize("fraction", [0.001, 0.005, 0.01, 0.05])
    def test_matches_sampled_batches(self, fraction):
        # アイテム0-3が次数 1, 3, 10, 30 の辺を持ち、残りの辺はアイテム4
        degrees = np.array([1, 3, 10, 30])
        total_edges = 10_000
        owners = np.concatenate([np.repeat(np.arange(4), degrees), np.full(total_edges - degrees.sum(), 4)])
        train = make_interactions(total_edges, 5, zip(range(total_edges), owners.tolist()))
        batch_size = int(total_edges * fraction)
        sampler = EpochSampler(train, batch_size, 0, np.random.default_rng(0))

        draws = 20_000
        hits = np.zeros(4)
        n_batches = 0
        while n_batches < draws:
            for batch in sampler.batches():
                hits += np.isin(np.arange(4), batch.items)
                n_batches += 1

        expected = batch_inclusion_probability(degrees, batch_size, total_edges)
        stderr = np.sqrt(expected * (1 - expected) / n_batches)
        assert np.all(np.abs(hits / n_batches - expected) < 3 * stderr)


class TestSynthetic:
    def test_deterministic(self):
        first = generate_synthetic(50, 40, 300, 1.0, seed=9)
        second = generate_synthetic(50, 40, 300, 1.0, seed=9)
        np.testing.assert_array_equal(first.edges, second.edges)

    def test_power_law(self):
        interactions = generate_synthetic(2000, 200, 50_000, 1.0, seed=0)
        degree = np.bincount(interactions.items, minlength=200)

        assert len(interactions) == 50_000
        assert stats.spearmanr(np.arange(200), degree)[0] < -0.95

    def test_infeasible(self):
        with pytest.raises(DegenerateInputError):
            generate_synthetic(2, 2, 5, 1.0, seed=0)


class TestBatches:
    def test_epoch_visits_every_edge_once(self):
        train = generate_synthetic(20, 15, 100, 1.0, seed=2)
        sampler = EpochSampler(train, batch_size=30, gamma=3, rng=np.random.default_rng(0))

        batches = list(sampler.batches())
        seen = np.concatenate([b.users * train.n_items + b.items for b in batches])

        assert len(batches) == sampler.n_batches == 4
        assert sorted(seen.tolist()) == sorted((train.users * train.n_items + train.items).tolist())
        assert all(b.negatives.shape == (len(b), 3) for b in batches)

    def test_negative_draw_count(self):
        train = generate_synthetic(200, 100, 5000, 1.0, seed=2)
        batch = sample_batch(train, 1024, 10, np.random.default_rng(0))
        assert batch.negatives.size == 10_240
