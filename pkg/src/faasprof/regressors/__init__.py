"""From-scratch regression algorithms, feature selection, and tuning.

Four algorithms are supported: ridge (exact penalized least squares), a greedy
squared-error decision tree, a bootstrap-averaged random forest, and stagewise
gradient boosting. ``fit`` dispatches on the algorithm tag using validated
hyperparameters; all stochastic fits are seeded and reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModelError
from .ensemble import (
    GradientBoostingModel,
    RandomForestModel,
    fit_gradient_boosting,
    fit_random_forest,
)
from .hyperparams import (
    ALGORITHMS,
    PRIORS,
    Constant,
    Hyperparameters,
    LogUniform,
    Prior,
    QUniform,
    defaults,
    sample_hyperparameters,
)
from .linear import RidgeModel, fit_ridge
from .selection import cv_mape, mape, sfs
from .tree import DecisionTreeModel, TreeNode, fit_decision_tree
from .tuning import Evaluation, tune_bo

MODEL_CLASSES = {
    "ridge": RidgeModel,
    "decision_tree": DecisionTreeModel,
    "random_forest": RandomForestModel,
    "gradient_boosting": GradientBoostingModel,
}


def fit(algorithm: str, X: np.ndarray, y: np.ndarray, hp: Hyperparameters | None = None, seed: int = 0):
    """Fit one algorithm on a design matrix; returns a model with .predict()."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ModelError(f"fit: X {X.shape} and y {y.shape} do not align")
    if y.size < 2:
        raise ModelError("fit: need at least 2 rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ModelError("fit: NaN or infinity in the training data")
    hp = (hp or Hyperparameters(algorithm, {})).validated()
    if hp.algorithm != algorithm:
        raise ModelError(f"fit: hyperparameters are for {hp.algorithm!r}, not {algorithm!r}")

    if algorithm == "ridge":
        return fit_ridge(X, y, float(hp.get("alpha", 1.0)))
    if algorithm == "decision_tree":
        return fit_decision_tree(
            X,
            y,
            max_depth=hp.get("max_depth", 3),
            min_samples_split=hp.get("min_samples_split", 2),
            min_samples_leaf=hp.get("min_samples_leaf", 1),
        )
    if algorithm == "random_forest":
        return fit_random_forest(
            X,
            y,
            n_estimators=int(hp.get("n_estimators", 5)),
            max_depth=int(hp.get("max_depth", 5)),
            min_samples_split=hp.get("min_samples_split", 2),
            min_samples_leaf=hp.get("min_samples_leaf", 1),
            seed=seed,
        )
    if algorithm == "gradient_boosting":
        return fit_gradient_boosting(
            X,
            y,
            n_estimators=int(hp.get("n_estimators", 1000)),
            learning_rate=float(hp.get("learning_rate", 0.1)),
            gamma=float(hp.get("gamma", 0.0)),
            max_depth=int(hp.get("max_depth", 100)),
            min_child_weight=int(hp.get("min_child_weight", 1)),
        )
    raise ModelError(f"unknown algorithm {algorithm!r}")


def predict(model, X: np.ndarray) -> np.ndarray:
    """Deterministic prediction; validates the input matrix."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ModelError("predict: NaN or infinity in the input")
    return model.predict(X)


__all__ = [
    "ALGORITHMS",
    "PRIORS",
    "Constant",
    "DecisionTreeModel",
    "Evaluation",
    "GradientBoostingModel",
    "Hyperparameters",
    "LogUniform",
    "MODEL_CLASSES",
    "Prior",
    "QUniform",
    "RandomForestModel",
    "RidgeModel",
    "TreeNode",
    "cv_mape",
    "defaults",
    "fit",
    "fit_decision_tree",
    "fit_gradient_boosting",
    "fit_random_forest",
    "fit_ridge",
    "mape",
    "predict",
    "sample_hyperparameters",
    "sfs",
    "tune_bo",
]
