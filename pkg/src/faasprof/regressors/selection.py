"""Forward sequential feature selection driven by cross-validated MAPE."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..dataset import Dataset, split
from ..errors import ModelError

FitFn = Callable[[np.ndarray, np.ndarray], object]


def mape(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean absolute percentage error, in percent. Undefined when any y is 0."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.size == 0 or y.shape != y_hat.shape:
        raise ModelError(f"mape: need equal nonempty vectors, got {y.shape} vs {y_hat.shape}")
    if np.any(y == 0):
        raise ModelError("mape: undefined for zero true values")
    return float(np.mean(np.abs((y - y_hat) / y))) * 100.0


def cv_mape(fit_fn: FitFn, d: Dataset, features: Sequence[str], folds: int, seed: int) -> float:
    """K-fold cross-validated MAPE of a model on the given feature subset."""
    scores = []
    for train, test in split(d, {"kind": "kfold", "k": folds, "seed": seed}):
        model = fit_fn(train.matrix(features), train.y)
        scores.append(mape(test.y, model.predict(test.matrix(features))))
    return float(np.mean(scores))


def sfs(
    fit_fn: FitFn,
    d: Dataset,
    max_features: int | None = None,
    folds: int = 5,
    seed: int = 0,
) -> list[str]:
    """Greedy forward selection: add the feature that minimizes CV MAPE, stop
    when nothing improves the incumbent or max_features is reached.

    The first feature is always the best single one (the empty set has no score).
    Ties go to the earlier column.
    """
    candidates = list(d.feature_names)
    if max_features is None:
        max_features = len(candidates)
    if max_features > len(candidates):
        raise ModelError(
            f"sfs: max_features {max_features} exceeds the {len(candidates)} available"
        )
    selected: list[str] = []
    incumbent = np.inf
    while candidates and len(selected) < max_features:
        best_feature, best_score = None, np.inf
        for feature in candidates:
            score = cv_mape(fit_fn, d, selected + [feature], folds, seed)
            if score < best_score:
                best_feature, best_score = feature, score
        if best_feature is None or best_score >= incumbent:
            break
        selected.append(best_feature)
        candidates.remove(best_feature)
        incumbent = best_score
    return selected
