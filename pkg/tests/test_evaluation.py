import numpy as np
import pytest

from faasprof.dataset import Dataset, FeatureRecipe
from faasprof.errors import DatasetError
from faasprof.evaluation import Leaderboard, TrainingSettings, run_experiments
from faasprof.model_io import load_model


def inv_cores_dataset(seed=0, reps=3, noise=0.01):
    """Synthetic component runtimes: t = 20 + 300/cores with multiplicative noise."""
    rng = np.random.default_rng(seed)
    cores = np.repeat(np.arange(4, 33, 4), reps).astype(float)
    t = (20.0 + 300.0 / cores) * (1.0 + noise * rng.standard_normal(cores.size))
    return Dataset(
        columns=("cores", "runtime_s"),
        data=np.column_stack([cores, t]),
        target="runtime_s",
    )


def standard_settings(**overrides):
    defaults = dict(
        seed=7,
        folds=5,
        budget=10,
        recipe=FeatureRecipe.build(inverse=["cores"], log=["cores"], polynomial_degree=2),
        split={"kind": "interpolation", "column": "cores", "held_values": [4, 12, 20, 28]},
    )
    defaults.update(overrides)
    return TrainingSettings(**defaults)


@pytest.fixture(scope="module")
def leaderboard(tmp_path_factory):
    out = tmp_path_factory.mktemp("models") / "winner.bin"
    board = run_experiments(inv_cores_dataset(), standard_settings(), output_path=out)
    return board, out


class TestRunExperiments:
    def test_eight_experiments(self, leaderboard):
        board, _ = leaderboard
        assert len(board.entries) == 8
        combos = {(e.algorithm, e.sfs_enabled) for e in board.entries}
        assert len(combos) == 8

    def test_winner_is_minimal_validation_mape(self, leaderboard):
        board, _ = leaderboard
        mapes = [e.validation_mape for e in board.entries]
        assert mapes == sorted(mapes)
        assert board.winner.validation_mape == min(mapes)

    def test_truth_in_ridge_span_beats_five_percent(self, leaderboard):
        board, _ = leaderboard
        assert board.winner.test_mape < 5.0

    def test_winner_persisted_and_loadable(self, leaderboard):
        board, out = leaderboard
        assert board.winner_path == out
        loaded = load_model(out)
        assert loaded.algorithm == board.winner.algorithm
        # a held-out configuration: prediction close to the noise-free law
        pred = loaded.predict_row({"cores": 12.0})
        truth = 20.0 + 300.0 / 12.0
        assert abs(pred - truth) / truth < 0.10

    def test_constant_target_gives_zero_mape_everywhere(self):
        d = Dataset(
            columns=("x", "runtime_s"),
            data=np.column_stack([np.arange(1, 21, dtype=float), np.full(20, 7.0)]),
            target="runtime_s",
        )
        settings = TrainingSettings(
            seed=1, folds=4, budget=2, split={"kind": "holdout", "fraction": 0.25, "seed": 1}
        )
        board = run_experiments(d, settings)
        for entry in board.entries:
            assert entry.validation_mape == pytest.approx(0.0, abs=1e-9)
            assert entry.test_mape == pytest.approx(0.0, abs=1e-9)

    def test_seeded_reproducibility(self, tmp_path):
        d = inv_cores_dataset()
        settings = standard_settings(budget=3, algorithms=("ridge", "decision_tree"))
        a = run_experiments(d, settings)
        b = run_experiments(d, settings)
        assert a.to_csv() == b.to_csv()

    def test_base_feature_projection(self, tmp_path):
        d = inv_cores_dataset()
        noisy = d.with_column("rep", np.tile([1.0, 2.0, 3.0], 8))
        settings = standard_settings(
            budget=2, algorithms=("ridge",), base_features=("cores",)
        )
        board = run_experiments(noisy, settings)
        assert "rep" not in board.winner.model.base_columns

    def test_normalize_rejected_in_recipe(self):
        with pytest.raises(DatasetError, match="normalize"):
            standard_settings(recipe=FeatureRecipe.build(normalize=["cores"]))

    def test_outer_kfold_rejected(self):
        with pytest.raises(DatasetError, match="outer split"):
            standard_settings(split={"kind": "kfold", "k": 5})


class TestLeaderboardRendering:
    def test_csv_and_text(self, leaderboard):
        board, _ = leaderboard
        csv_text = board.to_csv()
        lines = csv_text.strip().splitlines()
        assert lines[0].startswith("algorithm,sfs,validation_mape")
        assert len(lines) == 9
        text = board.to_text()
        assert "winner" in text
