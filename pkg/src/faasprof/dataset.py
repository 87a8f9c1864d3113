"""Tabular profiling datasets: CSV loading, feature engineering, train/test splitting.

A Dataset keeps numeric columns in a float matrix plus any categorical columns
(run ids, component and resource names) on the side. Feature recipes are ordered
lists of transforms; every transform is row-local except normalization, whose
statistics are recorded so a model can replay them on unseen rows.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DatasetError

#: columns of the campaign CSVs that are never numeric features
CAMPAIGN_CATEGORICAL = ("run_id", "component", "resource")


@dataclass(frozen=True)
class Dataset:
    columns: tuple[str, ...]
    data: np.ndarray  # (n_rows, n_columns) float64
    target: str
    categorical: dict[str, tuple[str, ...]] = field(default_factory=dict)
    provenance: str = ""
    rejected: int = 0
    normalization: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.target not in self.columns:
            raise DatasetError(f"target column {self.target!r} is missing")
        if self.data.shape != (self.n_rows, len(self.columns)):
            raise DatasetError("data matrix does not match the column list")
        if not np.all(np.isfinite(self.data)):
            raise DatasetError("dataset contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c for c in self.columns if c != self.target)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise DatasetError(f"no numeric column {name!r}") from None

    @property
    def y(self) -> np.ndarray:
        return self.column(self.target)

    def matrix(self, features: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(f) for f in features]) if features else np.empty((self.n_rows, 0))

    def with_column(self, name: str, values: np.ndarray) -> "Dataset":
        if name in self.columns or name in self.categorical:
            raise DatasetError(f"column {name!r} already exists (recipe applied twice?)")
        if not np.all(np.isfinite(values)):
            raise DatasetError(f"column {name!r} would contain non-finite values")
        return replace(
            self,
            columns=self.columns + (name,),
            data=np.column_stack([self.data, values]),
        )

    def take(self, indices: np.ndarray | list[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            data=self.data[indices],
            categorical={
                name: tuple(values[i] for i in indices) for name, values in self.categorical.items()
            },
        )

    def project(self, features: Sequence[str]) -> "Dataset":
        """Keep only the listed feature columns (plus the target)."""
        missing = [f for f in features if f not in self.columns]
        if missing:
            raise DatasetError(f"projection names absent column(s): {missing}")
        kept = tuple(features) + (self.target,)
        return replace(
            self,
            columns=kept,
            data=np.column_stack([self.column(c) for c in kept]),
        )


def _parse_cell(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        return math.nan  # marks a malformed numeric cell
    return value


def load_dataset(
    path: Path | str,
    target: str = "runtime_s",
    categorical: Iterable[str] | None = None,
    provenance: str = "",
) -> Dataset:
    """Load a campaign (or compatible) CSV into a validated Dataset.

    Rows failing the validity checks (malformed numbers, missing values in a
    retained numeric column, zero or non-finite target) are rejected and counted.
    Columns that are empty on every row are dropped; categorical columns default
    to the campaign schema's (run_id, component, resource).
    """
    path = Path(path)
    text = path.read_text() if path.exists() else None
    if text is None:
        raise DatasetError(f"no such dataset file: {path}")
    rows = list(csv.reader(text.splitlines()))
    if not rows or not rows[0]:
        raise DatasetError(f"{path}: empty dataset file")
    header = [h.strip() for h in rows[0]]
    if target not in header:
        raise DatasetError(f"{path}: target column {target!r} not in header {header}")
    if categorical is None:
        categorical = [c for c in CAMPAIGN_CATEGORICAL if c in header]
    categorical = [c for c in categorical if c in header]

    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    numeric_names = [h for h in header if h not in categorical]
    parsed: dict[str, list[float | None]] = {h: [] for h in numeric_names}
    cats: dict[str, list[str]] = {h: [] for h in categorical}
    for row in body:
        if len(row) != len(header):
            row = row + [""] * (len(header) - len(row)) if len(row) < len(header) else row[: len(header)]
        for name, cell in zip(header, row):
            if name in parsed:
                parsed[name].append(_parse_cell(cell))
            else:
                cats[name].append(cell.strip())

    # drop numeric columns that are empty everywhere (inapplicable for this campaign)
    kept = [
        name
        for name in numeric_names
        if any(v is not None for v in parsed[name])
    ]
    keep_mask = []
    for i in range(len(body)):
        ok = True
        for name in kept:
            value = parsed[name][i]
            if value is None or math.isnan(value):
                ok = False
        target_value = parsed[target][i] if target in kept else None
        if target_value is None or not math.isfinite(target_value) or target_value == 0.0:
            ok = False
        keep_mask.append(ok)

    kept_rows = [i for i, ok in enumerate(keep_mask) if ok]
    if not kept_rows:
        raise DatasetError(f"{path}: no valid rows after validity checks")
    data = np.array([[parsed[name][i] for name in kept] for i in kept_rows], dtype=float)
    return Dataset(
        columns=tuple(kept),
        data=data,
        target=target,
        categorical={name: tuple(values[i] for i in kept_rows) for name, values in cats.items()},
        provenance=provenance or str(path),
        rejected=len(body) - len(kept_rows),
    )


@dataclass(frozen=True)
class FeatureRecipe:
    """Ordered feature transforms, each a JSON-friendly dict with a ``kind`` key."""

    transforms: tuple[dict[str, Any], ...] = ()

    @classmethod
    def build(
        cls,
        inverse: Sequence[str] = (),
        log: Sequence[str] = (),
        polynomial_degree: int | None = None,
        one_hot: Sequence[str] = (),
        normalize: Sequence[str] = (),
    ) -> "FeatureRecipe":
        steps: list[dict[str, Any]] = []
        steps += [{"kind": "inverse", "column": c} for c in inverse]
        steps += [{"kind": "log", "column": c} for c in log]
        if polynomial_degree:
            steps.append({"kind": "polynomial_expansion", "degree": polynomial_degree})
        steps += [{"kind": "one_hot", "column": c} for c in one_hot]
        steps += [{"kind": "normalize", "column": c} for c in normalize]
        return cls(tuple(steps))


def _positive_only(values: np.ndarray, column: str, what: str) -> None:
    bad = np.flatnonzero(values <= 0)
    if bad.size:
        raise DatasetError(f"{what} of non-positive value in column {column!r} at row {bad[0]}")


def _power_name(factors: tuple[str, ...]) -> str:
    counts = Counter(factors)
    parts = []
    for name in sorted(counts, key=factors.index):
        power = counts[name]
        parts.append(name if power == 1 else f"{name}^{power}")
    return "*".join(parts)


def _inverse_pair(a: str, b: str) -> bool:
    return a == f"inv_{b}" or b == f"inv_{a}"


def _expand_polynomial(d: Dataset, degree: int, columns: Sequence[str] | None) -> Dataset:
    if degree < 1:
        raise DatasetError("polynomial degree must be >= 1")
    base = list(columns) if columns else [c for c in d.feature_names]
    for size in range(2, degree + 1):
        for combo in itertools.combinations_with_replacement(base, size):
            if any(_inverse_pair(a, b) for a, b in itertools.combinations(set(combo), 2)):
                continue  # X * inv_X is exactly constant; keep the design matrix full rank
            name = _power_name(combo)
            values = np.prod(np.column_stack([d.column(c) for c in combo]), axis=1)
            d = d.with_column(name, values)
    return d


def _select_rows(d: Dataset, column: str, op: str, value: Any) -> Dataset:
    if column in d.categorical:
        actual = np.array([v == str(value) for v in d.categorical[column]])
        if op == "!=":
            actual = ~actual
        elif op != "==":
            raise DatasetError(f"operator {op!r} not valid for categorical column {column!r}")
        mask = actual
    else:
        col = d.column(column)
        ops = {
            "==": col == value,
            "!=": col != value,
            "<": col < value,
            "<=": col <= value,
            ">": col > value,
            ">=": col >= value,
        }
        if op not in ops:
            raise DatasetError(f"unknown row-selection operator {op!r}")
        mask = ops[op]
    indices = np.flatnonzero(mask)
    if indices.size == 0:
        raise DatasetError(f"row selection {column} {op} {value} matches no rows")
    return d.take(indices)


def engineer_features(d: Dataset, recipe: FeatureRecipe) -> Dataset:
    """Apply the recipe's transforms in order, appending canonically named columns.

    inverse/log add ``inv_<col>``/``log_<col>`` (natural log); the polynomial step
    adds every product of 2..degree existing features (squares and cross terms,
    excluding exactly-collinear X*inv_X pairs); one_hot adds one indicator column
    per category; normalize z-scores a column in place and records the statistics.
    """
    for step in recipe.transforms:
        kind = step.get("kind")
        if kind == "inverse":
            col = step["column"]
            values = d.column(col)
            _positive_only(values, col, "inverse")
            d = d.with_column(f"inv_{col}", 1.0 / values)
        elif kind == "log":
            col = step["column"]
            values = d.column(col)
            _positive_only(values, col, "log")
            d = d.with_column(f"log_{col}", np.log(values))
        elif kind == "polynomial_expansion":
            d = _expand_polynomial(d, int(step.get("degree", 2)), step.get("columns"))
        elif kind == "one_hot":
            col = step["column"]
            if col not in d.categorical:
                raise DatasetError(f"one_hot: no categorical column {col!r}")
            for value in sorted(set(d.categorical[col])):
                indicator = np.array([1.0 if v == value else 0.0 for v in d.categorical[col]])
                d = d.with_column(f"{col}={value}", indicator)
        elif kind == "normalize":
            d = normalize_columns(d, [step["column"]])
        elif kind == "select_rows":
            d = _select_rows(d, step["column"], step.get("op", "=="), step.get("value"))
        else:
            raise DatasetError(f"unknown transform kind {kind!r}")
    return d


def normalize_columns(
    d: Dataset,
    columns: Sequence[str],
    stats: dict[str, tuple[float, float]] | None = None,
) -> Dataset:
    """Z-score columns in place, computing statistics here or replaying given ones."""
    data = d.data.copy()
    recorded = dict(d.normalization)
    for col in columns:
        idx = d.columns.index(col) if col in d.columns else None
        if idx is None:
            raise DatasetError(f"normalize: no numeric column {col!r}")
        if stats is not None:
            mean, std = stats[col]
        else:
            if col in recorded:
                raise DatasetError(f"column {col!r} is already normalized")
            mean = float(np.mean(data[:, idx]))
            std = float(np.std(data[:, idx]))
            if std == 0.0:
                raise DatasetError(f"normalize: column {col!r} is constant")
        data[:, idx] = (data[:, idx] - mean) / std
        recorded[col] = (mean, std)
    return replace(d, data=data, normalization=recorded)


def denormalize(values: np.ndarray, stats: tuple[float, float]) -> np.ndarray:
    mean, std = stats
    return values * std + mean


def split(d: Dataset, strategy: dict[str, Any]):
    """Split rows per strategy; returns (train, test) or a list of folds for kfold.

    Strategies: holdout(fraction, seed), kfold(k, seed),
    interpolation(column, held_values), extrapolation(column, threshold).
    """
    kind = strategy.get("kind")
    n = d.n_rows
    if kind == "holdout":
        fraction = float(strategy.get("fraction", 0.2))
        if not 0 <= fraction <= 1:
            raise DatasetError("holdout fraction must be in [0, 1]")
        rng = np.random.default_rng(strategy.get("seed", 0))
        order = rng.permutation(n)
        n_test = math.floor(fraction * n)
        return d.take(np.sort(order[n_test:])), d.take(np.sort(order[:n_test]))
    if kind == "kfold":
        k = int(strategy.get("k", 5))
        if not 2 <= k <= n:
            raise DatasetError(f"kfold needs 2 <= k <= n_rows, got k={k}, n={n}")
        rng = np.random.default_rng(strategy.get("seed", 0))
        order = rng.permutation(n)
        folds = []
        for chunk in np.array_split(order, k):
            test_idx = np.sort(chunk)
            train_idx = np.sort(np.setdiff1d(order, chunk))
            folds.append((d.take(train_idx), d.take(test_idx)))
        return folds
    if kind == "interpolation":
        column, held = strategy["column"], strategy["held_values"]
        col = d.column(column)
        for value in held:
            if not np.any(col == value):
                raise DatasetError(f"interpolation: held value {value} matches no rows")
        mask = np.isin(col, held)
        return d.take(np.flatnonzero(~mask)), d.take(np.flatnonzero(mask))
    if kind == "extrapolation":
        column, threshold = strategy["column"], float(strategy["threshold"])
        col = d.column(column)
        mask = col > threshold
        if not np.any(mask):
            raise DatasetError(f"extrapolation: no rows with {column} > {threshold}")
        return d.take(np.flatnonzero(~mask)), d.take(np.flatnonzero(mask))
    raise DatasetError(f"unknown split strategy {kind!r}")
