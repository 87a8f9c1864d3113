"""Train/validate/select pipeline: 8 experiments, one leaderboard, one winner.

Every algorithm is trained twice (with and without forward feature selection),
each tuned by budgeted sequential search. Hyperparameters are chosen on an inner
cross-validation of the training portion; the held-out test split is evaluated
once per experiment, for reporting. Features and target are z-scored with
train-side statistics inside every fit, which also gives the linear model its
affine offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .dataset import Dataset, FeatureRecipe, engineer_features, split
from .errors import DatasetError, ModelError
from .model_io import TrainedModel, save_model
from .regressors import ALGORITHMS, PRIORS, Hyperparameters, cv_mape, fit, mape, sfs, tune_bo
from .seeding import derive_seed

#: transform kinds a persisted model replays at inference time
_INFERENCE_KINDS = ("inverse", "log", "polynomial_expansion")


@dataclass(frozen=True)
class TrainingSettings:
    """Everything run_experiments needs besides the data itself."""

    target: str = "runtime_s"
    seed: int = 0
    folds: int = 5
    budget: int = 10
    max_features: int | None = None
    algorithms: tuple[str, ...] = ALGORITHMS
    sfs_modes: tuple[bool, ...] = (False, True)
    base_features: tuple[str, ...] | None = None  # None: every numeric column
    recipe: FeatureRecipe = FeatureRecipe()
    split: dict[str, Any] = field(default_factory=lambda: {"kind": "holdout", "fraction": 0.2})
    priors: dict[str, dict] | None = None  # per-algorithm overrides of PRIORS

    def __post_init__(self):
        for step in self.recipe.transforms:
            if step.get("kind") == "normalize":
                raise DatasetError(
                    "normalize does not belong in a training recipe: the pipeline "
                    "normalizes with train statistics automatically"
                )
        if self.split.get("kind") == "kfold":
            raise DatasetError("the outer split must be holdout/interpolation/extrapolation")

    def priors_for(self, algorithm: str) -> dict:
        if self.priors and algorithm in self.priors:
            merged = dict(PRIORS[algorithm])
            merged.update(self.priors[algorithm])
            return merged
        return PRIORS[algorithm]


@dataclass(frozen=True)
class ExperimentResult:
    algorithm: str
    sfs_enabled: bool
    hyperparameters: dict[str, Any]
    validation_mape: float
    test_mape: float | None
    model: TrainedModel


@dataclass(frozen=True)
class Leaderboard:
    entries: tuple[ExperimentResult, ...]  # sorted by validation MAPE, stable ties
    winner_path: Path | None = None

    @property
    def winner(self) -> ExperimentResult:
        return self.entries[0]

    def to_csv(self) -> str:
        lines = ["algorithm,sfs,validation_mape,test_mape,hyperparameters"]
        for e in self.entries:
            hp = ";".join(f"{k}={v}" for k, v in sorted(e.hyperparameters.items()))
            test = "" if e.test_mape is None else f"{e.test_mape:.6f}"
            lines.append(
                f"{e.algorithm},{'yes' if e.sfs_enabled else 'no'},"
                f"{e.validation_mape:.6f},{test},{hp}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(e.algorithm) for e in self.entries)
        lines = [f"{'algorithm':<{width}}  sfs  validation%  test%"]
        for i, e in enumerate(self.entries):
            marker = " <- winner" if i == 0 else ""
            test = "    -" if e.test_mape is None else f"{e.test_mape:5.2f}"
            lines.append(
                f"{e.algorithm:<{width}}  {'yes' if e.sfs_enabled else ' no'}  "
                f"{e.validation_mape:11.2f}  {test}{marker}"
            )
        return "\n".join(lines) + "\n"


class _NormalizedEstimator:
    """Estimator fitted on z-scored X and y; predicts in original units."""

    def __init__(self, core, x_mean, x_std, y_mean, y_std):
        self.core = core
        self.x_mean, self.x_std = x_mean, x_std
        self.y_mean, self.y_std = y_mean, y_std

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.x_mean) / self.x_std
        return self.core.predict(Z) * self.y_std + self.y_mean


def _normalized_fit(algorithm: str, hp: Hyperparameters, seed: int):
    def fit_fn(X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        x_mean, x_std = X.mean(axis=0), X.std(axis=0)
        x_std = np.where(x_std == 0.0, 1.0, x_std)
        y_mean, y_std = float(y.mean()), float(y.std()) or 1.0
        core = fit(algorithm, (X - x_mean) / x_std, (y - y_mean) / y_std, hp, seed=seed)
        return _NormalizedEstimator(core, x_mean, x_std, y_mean, y_std)

    return fit_fn


def _inference_recipe(recipe: FeatureRecipe) -> FeatureRecipe:
    return FeatureRecipe(
        tuple(s for s in recipe.transforms if s.get("kind") in _INFERENCE_KINDS)
    )


def train_single(
    d: Dataset,
    algorithm: str,
    hp: Hyperparameters,
    features: list[str],
    settings: TrainingSettings,
    base_columns: tuple[str, ...],
    validation_mape: float,
) -> TrainedModel:
    """Refit on the full training portion and package the result."""
    X = d.matrix(features)
    y = d.y
    wrapped = _normalized_fit(algorithm, hp, derive_seed(settings.seed, f"refit:{algorithm}"))(X, y)
    feature_stats = {
        name: (float(m), float(s))
        for name, m, s in zip(features, wrapped.x_mean, wrapped.x_std)
    }
    return TrainedModel(
        algorithm=algorithm,
        estimator=wrapped.core,
        hyperparameters=dict(hp.values),
        features=tuple(features),
        base_columns=base_columns,
        recipe=_inference_recipe(settings.recipe),
        feature_stats=feature_stats,
        target_stats=(wrapped.y_mean, wrapped.y_std),
        validation_mape=validation_mape,
    )


def run_experiments(
    d: Dataset,
    settings: TrainingSettings,
    output_path: Path | str | None = None,
) -> Leaderboard:
    """Run the algorithm x feature-selection grid and rank by validation MAPE.

    Raises only when every experiment fails; individual failures are collected
    into the final diagnostics. The winner is persisted to ``output_path``.
    """
    if settings.base_features is not None:
        d = d.project(settings.base_features)
    base_columns = tuple(d.feature_names)
    engineered = engineer_features(d, settings.recipe)
    train, test = split(engineered, settings.split)

    results: list[ExperimentResult] = []
    failures: list[str] = []
    for algorithm in settings.algorithms:
        for use_sfs in settings.sfs_modes:
            label = f"{algorithm}{'+sfs' if use_sfs else ''}"
            exp_seed = derive_seed(settings.seed, f"experiment:{label}")
            try:
                results.append(
                    _run_one(algorithm, use_sfs, train, test, settings, exp_seed, base_columns)
                )
            except (ModelError, DatasetError) as exc:
                failures.append(f"{label}: {exc}")

    if not results:
        raise ModelError("all experiments failed:\n" + "\n".join(failures))

    order = np.argsort([r.validation_mape for r in results], kind="stable")
    entries = tuple(results[i] for i in order)
    winner_path = None
    if output_path is not None:
        winner_path = save_model(entries[0].model, Path(output_path))
    return Leaderboard(entries, winner_path)


def _run_one(
    algorithm: str,
    use_sfs: bool,
    train: Dataset,
    test: Dataset,
    settings: TrainingSettings,
    exp_seed: int,
    base_columns: tuple[str, ...],
) -> ExperimentResult:
    all_features = list(train.feature_names)

    def select_features(hp: Hyperparameters) -> list[str]:
        if not use_sfs:
            return all_features
        fit_fn = _normalized_fit(algorithm, hp, derive_seed(exp_seed, "sfs-fit"))
        return sfs(
            fit_fn,
            train,
            max_features=settings.max_features,
            folds=settings.folds,
            seed=derive_seed(exp_seed, "sfs-folds"),
        )

    priors = settings.priors_for(algorithm)

    def make_hp(values: dict[str, Any]) -> Hyperparameters:
        hp = Hyperparameters(algorithm, values)
        return hp.validated() if settings.priors is None else hp

    def objective(values: dict[str, Any]) -> float:
        hp = make_hp(values)
        features = select_features(hp)
        fit_fn = _normalized_fit(algorithm, hp, derive_seed(exp_seed, "cv-fit"))
        return cv_mape(fit_fn, train, features, settings.folds, derive_seed(exp_seed, "cv-folds"))

    best_values, history = tune_bo(
        objective,
        priors,
        budget=settings.budget,
        seed=derive_seed(exp_seed, "bo"),
    )
    validation = min(e.objective for e in history)
    best_hp = make_hp(best_values)
    features = select_features(best_hp)
    model = train_single(train, algorithm, best_hp, features, settings, base_columns, validation)
    test_mape = None
    if test.n_rows:
        test_mape = mape(test.y, model.predict_dataset(test))
    return ExperimentResult(algorithm, use_sfs, dict(best_values), validation, test_mape, model)
