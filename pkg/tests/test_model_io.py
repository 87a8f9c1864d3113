import struct

import numpy as np
import pytest

from faasprof.dataset import Dataset, FeatureRecipe
from faasprof.errors import ModelError, PersistenceError
from faasprof.model_io import FORMAT_VERSION, MAGIC, TrainedModel, load_model, save_model
from faasprof.regressors import fit_decision_tree, fit_gradient_boosting, fit_random_forest, fit_ridge


def make_model(algorithm="ridge"):
    rng = np.random.default_rng(0)
    cores = rng.uniform(1, 32, size=30)
    X = np.column_stack([cores, 1.0 / cores])
    y = 20 + 300 / cores
    fitters = {
        "ridge": lambda: fit_ridge(X, y, alpha=0.01),
        "decision_tree": lambda: fit_decision_tree(X, y, max_depth=4),
        "random_forest": lambda: fit_random_forest(X, y, seed=1),
        "gradient_boosting": lambda: fit_gradient_boosting(X, y, n_estimators=30, learning_rate=0.3),
    }
    estimator = fitters[algorithm]()
    return (
        TrainedModel(
            algorithm=algorithm,
            estimator=estimator,
            hyperparameters={"alpha": 0.01} if algorithm == "ridge" else {},
            features=("cores", "inv_cores"),
            base_columns=("cores",),
            recipe=FeatureRecipe(({"kind": "inverse", "column": "cores"},)),
            feature_stats={"cores": (16.0, 8.0), "inv_cores": (0.2, 0.1)},
            target_stats=(40.0, 12.0),
            validation_mape=3.5,
        ),
        X,
    )


class TestRoundTrip:
    @pytest.mark.parametrize(
        "algorithm", ["ridge", "decision_tree", "random_forest", "gradient_boosting"]
    )
    def test_save_load_predict_identical(self, tmp_path, algorithm):
        model, X = make_model(algorithm)
        path = save_model(model, tmp_path / "m.bin")
        loaded = load_model(path)
        assert loaded.algorithm == model.algorithm
        assert loaded.features == model.features
        assert loaded.validation_mape == model.validation_mape
        a = model.predict_matrix(X)
        b = loaded.predict_matrix(X)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_predict_row_replays_recipe(self, tmp_path):
        model, _ = make_model()
        loaded = load_model(save_model(model, tmp_path / "m.bin"))
        direct = model.predict_row({"cores": 8.0})
        assert loaded.predict_row({"cores": 8.0}) == pytest.approx(direct, abs=1e-12)

    def test_missing_feature_named(self):
        model, _ = make_model()
        with pytest.raises(ModelError, match="cores"):
            model.predict_row({"batch_size": 5})


class TestFileFormat:
    def test_magic_and_version_bytes(self, tmp_path):
        model, _ = make_model()
        blob = save_model(model, tmp_path / "m.bin").read_bytes()
        assert blob[:8] == MAGIC
        assert struct.unpack("<H", blob[8:10])[0] == FORMAT_VERSION

    def test_truncated_file_is_checksum_error(self, tmp_path):
        model, _ = make_model()
        path = save_model(model, tmp_path / "m.bin")
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(PersistenceError, match="truncated|checksum"):
            load_model(path)

    def test_corrupted_payload_is_checksum_error(self, tmp_path):
        model, _ = make_model()
        path = save_model(model, tmp_path / "m.bin")
        blob = bytearray(path.read_bytes())
        blob[25] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(PersistenceError, match="checksum"):
            load_model(path)

    def test_wrong_version_is_version_error(self, tmp_path):
        model, _ = make_model()
        path = save_model(model, tmp_path / "m.bin")
        blob = bytearray(path.read_bytes())
        blob[8:10] = struct.pack("<H", 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(PersistenceError, match="version"):
            load_model(path)

    def test_not_a_model_file(self, tmp_path):
        path = tmp_path / "nope.bin"
        path.write_bytes(b"hello world, this is not a model" + b"\x00" * 64)
        with pytest.raises(PersistenceError, match="magic"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PersistenceError, match="no such"):
            load_model(tmp_path / "absent.bin")
