"""Trained-model container and its portable on-disk format.

A trained model bundles the fitted estimator with everything inference needs:
the feature recipe to replay, the selected feature names, and the train-side
normalization statistics for features and target.

File layout (documented, stable across releases):

    bytes 0..7    magic b"FPROFMDL"
    bytes 8..9    format version, uint16 little-endian
    bytes 10..17  payload length N, uint64 little-endian
    bytes 18..    N bytes of UTF-8 JSON payload
    last 32 bytes SHA-256 over every preceding byte

The JSON payload carries the algorithm tag, hyperparameters, estimator
parameters, feature names, recipe, and normalization statistics. JSON float
serialization round-trips exactly, so a loaded model predicts bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .dataset import Dataset, FeatureRecipe, engineer_features
from .errors import ModelError, PersistenceError
from .regressors import MODEL_CLASSES

MAGIC = b"FPROFMDL"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainedModel:
    """A fitted predictor plus the preprocessing needed to apply it to raw rows."""

    algorithm: str
    estimator: Any
    hyperparameters: dict[str, Any]
    features: tuple[str, ...]
    base_columns: tuple[str, ...]
    recipe: FeatureRecipe = FeatureRecipe()
    feature_stats: dict[str, tuple[float, float]] = field(default_factory=dict)
    target_stats: tuple[float, float] | None = None
    validation_mape: float | None = None

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        if not self.feature_stats:
            return X
        X = X.copy()
        for i, name in enumerate(self.features):
            mean, std = self.feature_stats[name]
            X[:, i] = (X[:, i] - mean) / std
        return X

    def _denormalize_target(self, y: np.ndarray) -> np.ndarray:
        if self.target_stats is None:
            return y
        mean, std = self.target_stats
        return y * std + mean

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        """Predict from an already-engineered matrix whose columns are ``features``."""
        X = np.asarray(X, dtype=float)
        return self._denormalize_target(self.estimator.predict(self._normalize(X)))

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        """Predict for dataset rows that already contain the engineered columns."""
        return self.predict_matrix(d.matrix(self.features))

    def predict_row(self, values: Mapping[str, float]) -> float:
        """Predict from raw base-feature values, replaying the stored recipe."""
        missing = [c for c in self.base_columns if c not in values]
        if missing:
            raise ModelError(f"prediction input is missing feature column(s): {missing}")
        data = np.array([[float(values[c]) for c in self.base_columns] + [0.0]])
        d = Dataset(columns=self.base_columns + ("__target__",), data=data, target="__target__")
        d = engineer_features(d, self.recipe)
        return float(self.predict_dataset(d)[0])

    def to_payload(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "hyperparameters": self.hyperparameters,
            "estimator": self.estimator.params(),
            "features": list(self.features),
            "base_columns": list(self.base_columns),
            "recipe": list(self.recipe.transforms),
            "feature_stats": {k: list(v) for k, v in self.feature_stats.items()},
            "target_stats": list(self.target_stats) if self.target_stats else None,
            "validation_mape": self.validation_mape,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TrainedModel":
        algorithm = payload["algorithm"]
        model_cls = MODEL_CLASSES.get(algorithm)
        if model_cls is None:
            raise PersistenceError(f"model file names unknown algorithm {algorithm!r}")
        return cls(
            algorithm=algorithm,
            estimator=model_cls.from_params(payload["estimator"]),
            hyperparameters=payload["hyperparameters"],
            features=tuple(payload["features"]),
            base_columns=tuple(payload["base_columns"]),
            recipe=FeatureRecipe(tuple(payload["recipe"])),
            feature_stats={k: (v[0], v[1]) for k, v in payload["feature_stats"].items()},
            target_stats=tuple(payload["target_stats"]) if payload["target_stats"] else None,
            validation_mape=payload["validation_mape"],
        )


def save_model(model: TrainedModel, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(model.to_payload(), sort_keys=True).encode()
    head = MAGIC + struct.pack("<H", FORMAT_VERSION) + struct.pack("<Q", len(payload))
    body = head + payload
    path.write_bytes(body + hashlib.sha256(body).digest())
    return path


def load_model(path: Path | str) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise PersistenceError(f"no such model file: {path}")
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 10 + 32 or not blob.startswith(MAGIC):
        raise PersistenceError(f"{path}: not a model file (bad magic)")
    version = struct.unpack("<H", blob[8:10])[0]
    if version != FORMAT_VERSION:
        raise PersistenceError(
            f"{path}: unsupported model format version {version} (expected {FORMAT_VERSION})"
        )
    (length,) = struct.unpack("<Q", blob[10:18])
    body_end = 18 + length
    if len(blob) != body_end + 32:
        raise PersistenceError(f"{path}: truncated or padded model file (checksum region)")
    expected = blob[body_end:]
    actual = hashlib.sha256(blob[:body_end]).digest()
    if expected != actual:
        raise PersistenceError(f"{path}: checksum mismatch, file is corrupted")
    return TrainedModel.from_payload(json.loads(blob[18:body_end].decode()))
