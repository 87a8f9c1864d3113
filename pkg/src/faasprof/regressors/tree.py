"""Regression trees: greedy binary splitting minimizing squared error.

Split search is exhaustive over all features and thresholds (midpoints between
consecutive distinct sorted values). Ties are broken by feature order, then by
the lowest threshold, so a fit is fully deterministic. Leaf values are subset
means, which keeps every prediction inside the training-target range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ModelError


@dataclass
class TreeNode:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "value": self.value,
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TreeNode":
        node = cls(value=payload["value"])
        if "feature" in payload:
            node.feature = payload["feature"]
            node.threshold = payload["threshold"]
            node.left = cls.from_dict(payload["left"])
            node.right = cls.from_dict(payload["right"])
        return node


def resolve_min_samples(value: float | int, n: int, floor: int) -> int:
    """Counts stay counts; values below 1 are fractions of the training set."""
    if value is None:
        return floor
    if 0 < value < 1:
        return max(floor, math.ceil(value * n))
    return max(floor, int(value))


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, min_leaf: int, parent_sse: float):
    """Best (gain, feature, threshold) over all candidate splits of one node."""
    m = idx.size
    best_gain, best_feature, best_threshold = 0.0, -1, 0.0
    yv = y[idx]
    for feature in range(X.shape[1]):
        xv = X[idx, feature]
        order = np.argsort(xv, kind="stable")
        xs, ys = xv[order], yv[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        left_sizes = np.arange(min_leaf, m - min_leaf + 1)  # xs[left_sizes] stays in range: min_leaf >= 1
        if left_sizes.size == 0:
            continue
        valid = xs[left_sizes - 1] < xs[left_sizes]
        if not np.any(valid):
            continue
        left_sum = csum[left_sizes - 1]
        left_sq = csq[left_sizes - 1]
        sse_left = left_sq - left_sum * left_sum / left_sizes
        right_sizes = m - left_sizes
        right_sum = csum[-1] - left_sum
        sse_right = (csq[-1] - left_sq) - right_sum * right_sum / right_sizes
        gain = parent_sse - (sse_left + sse_right)
        gain[~valid] = -np.inf
        j = int(np.argmax(gain))  # first maximum: lowest threshold wins ties
        if gain[j] > best_gain:
            best_gain = float(gain[j])
            best_feature = feature
            split_at = left_sizes[j]
            best_threshold = float((xs[split_at - 1] + xs[split_at]) / 2.0)
    return best_gain, best_feature, best_threshold


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None = None,
    min_samples_split: float | int = 2,
    min_samples_leaf: float | int = 1,
    min_gain: float = 0.0,
) -> TreeNode:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    depth_cap = max_depth if max_depth is not None else n + 1
    min_split = resolve_min_samples(min_samples_split, n, 2)
    min_leaf = resolve_min_samples(min_samples_leaf, n, 1)

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        yv = y[idx]
        value = float(yv.mean())
        node = TreeNode(value=value)
        if depth >= depth_cap or idx.size < min_split or idx.size < 2 * min_leaf:
            return node
        if yv.max() == yv.min():
            return node
        parent_sse = float(((yv - value) ** 2).sum())
        gain, feature, threshold = _best_split(X, y, idx, min_leaf, parent_sse)
        if feature < 0 or gain <= min_gain:
            return node
        mask = X[idx, feature] <= threshold
        node.feature = feature
        node.threshold = threshold
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    return grow(np.arange(n), 0)


def predict_tree(root: TreeNode, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=float)

    def walk(node: TreeNode, rows: np.ndarray) -> None:
        if node.is_leaf:
            out[rows] = node.value
            return
        mask = X[rows, node.feature] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(root, np.arange(X.shape[0]))
    return out


@dataclass(frozen=True)
class DecisionTreeModel:
    root: TreeNode
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(f"tree expects {self.n_features} features, got shape {X.shape}")
        return predict_tree(self.root, X)

    def params(self) -> dict:
        return {"root": self.root.to_dict(), "n_features": self.n_features}

    @classmethod
    def from_params(cls, params: dict) -> "DecisionTreeModel":
        return cls(TreeNode.from_dict(params["root"]), params["n_features"])


def fit_decision_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None = 3,
    min_samples_split: float | int = 2,
    min_samples_leaf: float | int = 1,
) -> DecisionTreeModel:
    X = np.asarray(X, dtype=float)
    root = build_tree(
        X,
        y,
        max_depth=max_depth,
        min_samples_split=min_samples_split,
        min_samples_leaf=min_samples_leaf,
    )
    return DecisionTreeModel(root, X.shape[1])
