"""CLIコマンドのテスト"""

import math

import numpy as np
import pandas as pd
import pytest
import yaml

from prism_forge.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, run
from prism_forge.commands.correlate import magnitude_frame
from prism_forge.embeddings.table import EmbeddingTable

FAST = ["--dim", "8", "--batch-size", "128", "--max-epochs", "2", "--lr", "0.05"]


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _train(synthetic_args, out_dir, *extra):
    return run(["train", *synthetic_args, *FAST, "--out-dir", out_dir, "--force", *extra])


class TestTrain:
    def test_writes_artifacts(self, workdir, synthetic_args):
        assert _train(synthetic_args, "out") == EXIT_OK

        out = workdir / "out"
        for name in ("metrics.csv", "epoch_log.csv", "config.yml", "model/users.prsm", "model/best/items.prsm", "model/provenance.txt"):
            assert (out / name).exists(), name
        metrics = pd.read_csv(out / "metrics.csv")
        assert metrics.scorer.tolist() == ["dot", "cosine"]
        assert "experiment_hash" in (out / "model" / "provenance.txt").read_text(encoding="utf-8")

    def test_negative_lambda_is_config_error(self, synthetic_args):
        assert _train(synthetic_args, "out", "--lambda=-1") == EXIT_CONFIG

    def test_unknown_override_is_config_error(self, synthetic_args):
        assert _train(synthetic_args, "out", "--set", "train.nope=1") == EXIT_CONFIG

    def test_same_config_same_metrics(self, workdir, synthetic_args):
        assert _train(synthetic_args, "first") == EXIT_OK
        assert _train(synthetic_args, "second") == EXIT_OK

        assert (workdir / "first" / "metrics.csv").read_bytes() == (workdir / "second" / "metrics.csv").read_bytes()

    def test_config_file_is_picked_up(self, workdir, synthetic_args):
        (workdir / ".prism-forge.yml").write_text("train:\n  loss:\n    kind: SSM\n    n_negatives: 2\n", encoding="utf-8")
        assert _train(synthetic_args, "out") == EXIT_OK

        resolved = yaml.safe_load((workdir / "out" / "config.yml").read_text(encoding="utf-8"))
        assert resolved["train"]["loss"]["kind"] == "SSM"

    def test_dataset_file(self, workdir):
        assert run(["synth", "-o", "data.tsv", "--n-users", "40", "--n-items", "25", "--n-edges", "400"]) == EXIT_OK
        result = run(["train", "--dataset", "data.tsv", *FAST, "--set", "train.eval_k=10", "--out-dir", "out", "--force"])

        assert result == EXIT_OK
        assert (workdir / "data.users.map").exists()


class TestEvaluate:
    def test_saved_model(self, workdir, synthetic_args):
        assert _train(synthetic_args, "out") == EXIT_OK
        result = run(["evaluate", "--model", "out/model", *synthetic_args, "--out-dir", "eval", "--force"])

        assert result == EXIT_OK
        trained = pd.read_csv(workdir / "out" / "metrics.csv")
        evaluated = pd.read_csv(workdir / "eval" / "metrics.csv")
        assert evaluated.ndcg_overall.tolist() == pytest.approx(trained.ndcg_overall.tolist(), abs=1e-12)

    def test_shape_mismatch(self, synthetic_args):
        assert _train(synthetic_args, "out") == EXIT_OK
        args = [*synthetic_args, "--set", "dataset.synthetic.n_users=55"]
        assert run(["evaluate", "--model", "out/model", *args, "--out-dir", "eval", "--force"]) == EXIT_FAILURE


class TestCorrelate:
    def test_untrained_prism(self, workdir, synthetic_args):
        result = run(["correlate", "--untrained", *synthetic_args, "--alpha", "1", "--out-dir", "corr", "--force"])

        assert result == EXIT_OK
        correlation = pd.read_csv(workdir / "corr" / "correlation.csv").set_index("entity")
        assert correlation.loc["item", "pearson_log"] == pytest.approx(1.0, abs=1e-9)
        assert len(pd.read_csv(workdir / "corr" / "magnitudes.csv")) == 30

    def test_requires_one_source(self, synthetic_args):
        assert run(["correlate", *synthetic_args]) == EXIT_CONFIG

    def test_magnitude_frame(self):
        items = EmbeddingTable(np.array([[3.0, 4.0], [0.0, 1.0], [1.0, 1.0]]))

        frame = magnitude_frame(items, np.array([5, 0, 2]), np.array([0, 2, 1], dtype=np.int8))

        assert frame.magnitude.tolist() == pytest.approx([5.0, 1.0, math.sqrt(2.0)])
        assert frame.stratum.tolist() == ["popular", "unpopular", "neutral"]
        assert frame["index"].tolist() == [0, 1, 2]


class TestSweepAndCompare:
    def test_alpha_sweep(self, workdir, synthetic_args):
        args = ["sweep", *synthetic_args, *FAST, "--axis", "alpha", "--values", "0", "--values", "1", "--out-dir", "sweep", "--force"]
        assert run(args) == EXIT_OK

        sweep = pd.read_csv(workdir / "sweep" / "sweep.csv")
        assert len(sweep) == 2
        assert (sweep.status == "ok").all()
        assert sweep.value.tolist() == [0.0, 1.0]
        assert "alpha sweep" in (workdir / "sweep" / "summary.md").read_text(encoding="utf-8")

    def test_sweep_needs_axis(self, synthetic_args):
        assert run(["sweep", *synthetic_args, *FAST, "--out-dir", "sweep", "--force"]) == EXIT_CONFIG

    def test_compare(self, workdir, synthetic_args):
        args = [
            "compare", *synthetic_args, *FAST,
            "--set", "experiment.lr_grid=[0.05]",
            "--set", "experiment.lambda_grid=[0.0, 1.0e-4]",
            "--out-dir", "cmp", "--force",
        ]
        assert run(args) == EXIT_OK

        compare = pd.read_csv(workdir / "cmp" / "compare.csv")
        assert len(compare) == 7
        assert set(compare.method) == {"tuned_wd", "prism", "prism_vs_tuned_wd"}
        assert (workdir / "cmp" / "grids" / "prism_seed=0.csv").exists()
        prism = compare[(compare.method == "prism") & (compare.seed == "0")]
        assert prism["lambda"].iloc[0] == 0.0


class TestTheory:
    def test_heatmap(self, workdir):
        result = run(["theory", "heatmap", "-o", "heat.csv", "--degrees", "1,10,100", "--fractions", "0.01,0.02"])

        assert result == EXIT_OK
        assert len(pd.read_csv(workdir / "heat.csv")) == 6

    def test_point(self, workdir):
        args = [
            "theory", "point", "-o", "point.csv", "--degree", "10", "--batch-size", "200",
            "--total-edges", "10000", "--n-items", "2000", "--gamma", "1",
        ]
        assert run(args) == EXIT_OK

        values = pd.read_csv(workdir / "point.csv").set_index("quantity")["value"]
        assert values["full_decay"] == pytest.approx(3.45561669e-6, rel=1e-6)
        assert values["batched_decay"] == pytest.approx(3.47195814e-6, rel=1e-6)
        assert values["negsample"] == pytest.approx(5.00805503e-6, rel=1e-6)

    def test_oracle(self, workdir):
        args = ["theory", "oracle", "-o", "oracle.csv", "--degrees", "1,10", "--fractions", "0.05", "--trials", "1000"]
        assert run(args) == EXIT_OK

        grid = pd.read_csv(workdir / "oracle.csv")
        assert len(grid) == 2 and grid.z.map(math.isfinite).all()
        assert (grid.mc_stderr > 0).all()

    def test_oracle_too_few_trials(self):
        assert run(["theory", "oracle", "-o", "oracle.csv", "--trials", "10"]) == EXIT_CONFIG


class TestMisc:
    def test_synth(self, workdir):
        assert run(["synth", "-o", "synthetic.tsv", "--n-users", "30", "--n-items", "20", "--n-edges", "100"]) == EXIT_OK
        lines = (workdir / "synthetic.tsv").read_text(encoding="utf-8").splitlines()
        assert len([line for line in lines if line and not line.startswith("#")]) == 100

    def test_init_without_prompts(self, workdir):
        assert run(["init", "--no-interactive", "--loss", "SSM", "--init", "prism"]) == EXIT_OK

        config = yaml.safe_load((workdir / ".prism-forge.yml").read_text(encoding="utf-8"))
        assert config["train"]["loss"]["kind"] == "SSM"
        assert config["train"]["init"]["strategy"] == "prism"
        assert config["train"]["decay"]["lambda"] == 0.0

    def test_init_directau_gamma_grid(self, workdir):
        assert run(["init", "--no-interactive", "--loss", "DirectAU", "--init", "xavier_uniform"]) == EXIT_OK

        config = yaml.safe_load((workdir / ".prism-forge.yml").read_text(encoding="utf-8"))
        assert config["experiment"]["gamma_grid"] == [1.0, 2.0, 5.0]
        assert config["train"]["batch_size"] == 4096

    def test_init_overwrite_declined(self, workdir, mocker):
        (workdir / ".prism-forge.yml").write_text("train: {}\n", encoding="utf-8")
        mocker.patch("prism_forge.commands.init.questionary.confirm").return_value.ask.return_value = False

        assert run(["init", "--no-interactive"]) == EXIT_OK
        assert (workdir / ".prism-forge.yml").read_text(encoding="utf-8") == "train: {}\n"

    def test_version(self):
        assert run(["--version"]) == EXIT_OK

    def test_banner(self):
        assert run([]) == EXIT_OK

    def test_unknown_command(self):
        assert run(["nope"]) == EXIT_CONFIG
