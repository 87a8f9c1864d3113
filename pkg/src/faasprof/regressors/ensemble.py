"""Bootstrap-averaged forests and stagewise gradient boosting on squared error."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError
from .tree import TreeNode, build_tree, predict_tree


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[TreeNode, ...]
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(f"forest expects {self.n_features} features, got shape {X.shape}")
        return np.mean([predict_tree(t, X) for t in self.trees], axis=0)

    def params(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees], "n_features": self.n_features}

    @classmethod
    def from_params(cls, params: dict) -> "RandomForestModel":
        return cls(tuple(TreeNode.from_dict(t) for t in params["trees"]), params["n_features"])


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 5,
    max_depth: int | None = None,
    min_samples_split: float | int = 2,
    min_samples_leaf: float | int = 1,
    seed: int = 0,
) -> RandomForestModel:
    """Average of trees, each grown on a seeded bootstrap resample."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    n = y.size
    trees = []
    for _ in range(n_estimators):
        idx = rng.integers(0, n, size=n)
        trees.append(
            build_tree(
                X[idx],
                y[idx],
                max_depth=max_depth,
                min_samples_split=min_samples_split,
                min_samples_leaf=min_samples_leaf,
            )
        )
    return RandomForestModel(tuple(trees), X.shape[1])


@dataclass(frozen=True)
class GradientBoostingModel:
    """Additive model F(x) = init + lr * sum(tree_i(x)) + constant_tail.

    ``mse_path_`` records the training MSE after every one of the configured
    rounds; it is non-increasing by construction. Once a round's best tree is a
    single leaf, split gains (variance-based, hence invariant to the uniform
    residual shift a leaf applies) are identical in every later round, so those
    rounds reduce to mean-only updates collected into ``constant_tail``.
    """

    init_value: float
    trees: tuple[TreeNode, ...]
    learning_rate: float
    constant_tail: float
    n_features: int
    mse_path_: tuple[float, ...] = field(repr=False)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(f"boosting expects {self.n_features} features, got shape {X.shape}")
        out = np.full(X.shape[0], self.init_value + self.constant_tail)
        for tree in self.trees:
            out += self.learning_rate * predict_tree(tree, X)
        return out

    def params(self) -> dict:
        return {
            "init_value": self.init_value,
            "trees": [t.to_dict() for t in self.trees],
            "learning_rate": self.learning_rate,
            "constant_tail": self.constant_tail,
            "n_features": self.n_features,
        }

    @classmethod
    def from_params(cls, params: dict) -> "GradientBoostingModel":
        return cls(
            init_value=params["init_value"],
            trees=tuple(TreeNode.from_dict(t) for t in params["trees"]),
            learning_rate=params["learning_rate"],
            constant_tail=params["constant_tail"],
            n_features=params["n_features"],
            mse_path_=(),
        )


def fit_gradient_boosting(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 1000,
    learning_rate: float = 0.1,
    gamma: float = 0.0,
    max_depth: int = 100,
    min_child_weight: int = 1,
) -> GradientBoostingModel:
    """Stagewise squared-error boosting; gamma is the minimum split gain.

    Each round fits a regression tree to the current residuals and shrinks its
    contribution by ``learning_rate``. An update that no longer lowers the
    training MSE in floating point (possible only once residuals sit at rounding
    noise) is discarded and the model is frozen for the remaining rounds.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0 < learning_rate < 2:
        raise ModelError("gradient boosting: learning_rate must be in (0, 2)")
    init = float(y.mean())
    residual = y - init
    trees: list[TreeNode] = []
    constant_tail = 0.0
    mse_path: list[float] = []
    prev_mse = float(np.mean(residual**2))
    leaf_only = False

    for _ in range(n_estimators):
        if leaf_only:
            step = learning_rate * float(residual.mean())
            candidate = residual - step
        else:
            tree = build_tree(
                X,
                residual,
                max_depth=max_depth,
                min_samples_split=2,
                min_samples_leaf=min_child_weight,
                min_gain=gamma,
            )
            if tree.is_leaf:
                leaf_only = True
                step = learning_rate * tree.value
                candidate = residual - step
            else:
                candidate = residual - learning_rate * predict_tree(tree, X)
        new_mse = float(np.mean(candidate**2))
        if new_mse > prev_mse:  # update below rounding resolution: freeze
            remaining = n_estimators - len(mse_path)
            mse_path.extend([prev_mse] * remaining)
            break
        if leaf_only:
            constant_tail += step
        else:
            trees.append(tree)
        residual = candidate
        prev_mse = new_mse
        mse_path.append(new_mse)

    return GradientBoostingModel(
        init_value=init,
        trees=tuple(trees),
        learning_rate=learning_rate,
        constant_tail=constant_tail,
        n_features=X.shape[1],
        mse_path_=tuple(mse_path),
    )
