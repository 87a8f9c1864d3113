"""Hyperparameter priors for the four supported algorithms.

Distribution-typed entries are tunable; constant entries are fixed. Values are
validated against their prior support before any fit. ``max_features: auto``
means all features (the regression convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from ..errors import ModelError


@dataclass(frozen=True)
class Constant:
    value: Any

    def sample(self, rng: np.random.Generator) -> Any:
        return self.value

    def contains(self, value: Any) -> bool:
        return value == self.value


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0 < self.low < self.high:
            raise ModelError(f"loguniform needs 0 < low < high, got ({self.low}, {self.high})")

    def sample(self, rng: np.random.Generator) -> float:
        return math.exp(rng.uniform(math.log(self.low), math.log(self.high)))

    def contains(self, value: Any) -> bool:
        return isinstance(value, (int, float)) and self.low <= value <= self.high


@dataclass(frozen=True)
class QUniform:
    low: float
    high: float
    q: float = 1.0

    def __post_init__(self):
        if self.low >= self.high:
            raise ModelError(f"quniform needs low < high, got ({self.low}, {self.high})")
        if self.q <= 0:
            raise ModelError("quniform needs q > 0")

    def sample(self, rng: np.random.Generator) -> float:
        raw = rng.uniform(self.low, self.high)
        return float(np.clip(round(raw / self.q) * self.q, self.low, self.high))

    def contains(self, value: Any) -> bool:
        if not isinstance(value, (int, float)):
            return False
        return self.low <= value <= self.high and abs(value / self.q - round(value / self.q)) < 1e-9


Prior = Constant | LogUniform | QUniform

#: algorithm declaration order; used for every tie-break in model selection
ALGORITHMS = ("ridge", "decision_tree", "random_forest", "gradient_boosting")

PRIORS: dict[str, dict[str, Prior]] = {
    "ridge": {
        "alpha": LogUniform(0.01, 1.0),
    },
    "gradient_boosting": {
        "min_child_weight": Constant(1),
        "gamma": LogUniform(0.1, 10.0),
        "n_estimators": Constant(1000),
        "learning_rate": LogUniform(0.01, 1.0),
        "max_depth": Constant(100),
    },
    "decision_tree": {
        "criterion": Constant("mse"),
        "max_depth": Constant(3),
        "max_features": Constant("auto"),
        "min_samples_split": LogUniform(0.01, 1.0),
        "min_samples_leaf": LogUniform(0.01, 0.5),
    },
    "random_forest": {
        "n_estimators": Constant(5),
        "criterion": Constant("mse"),
        "max_depth": QUniform(3, 6, 1),
        "max_features": Constant("auto"),
        "min_samples_split": LogUniform(0.1, 1.0),
        "min_samples_leaf": Constant(1),
    },
}


@dataclass(frozen=True)
class Hyperparameters:
    algorithm: str
    values: Mapping[str, Any]

    def __post_init__(self):
        if self.algorithm not in PRIORS:
            raise ModelError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")

    def validated(self) -> "Hyperparameters":
        priors = PRIORS[self.algorithm]
        for name, value in self.values.items():
            prior = priors.get(name)
            if prior is None:
                raise ModelError(f"{self.algorithm}: unknown hyperparameter {name!r}")
            if not prior.contains(value):
                raise ModelError(
                    f"{self.algorithm}: {name}={value!r} outside the prior support {prior}"
                )
        return self

    def get(self, name: str, default: Any = None) -> Any:
        if name in self.values:
            return self.values[name]
        prior = PRIORS[self.algorithm].get(name)
        if isinstance(prior, Constant):
            return prior.value
        return default


def sample_hyperparameters(algorithm: str, rng: np.random.Generator) -> Hyperparameters:
    """One draw from the algorithm's prior table (constants included verbatim)."""
    priors = PRIORS[algorithm]
    return Hyperparameters(algorithm, {name: prior.sample(rng) for name, prior in priors.items()})


def defaults(algorithm: str) -> Hyperparameters:
    """Mid-support values, handy for unit tests and direct fits."""
    rng = np.random.default_rng(0)
    return sample_hyperparameters(algorithm, rng)
