"""Budgeted hyperparameter search: random initialization, then density-ranked
sequential proposals (a tree-structured-Parzen-style surrogate).

After evaluating a random block, observed points are split into a good and a bad
set by objective quantile. Candidates are drawn around the good points (in log
space for loguniform dimensions), scored by the good/bad kernel-density ratio,
and the best-scored candidate is evaluated next. Exactly ``budget`` objective
evaluations happen; every sampled value stays inside its prior support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from ..errors import ModelError
from .hyperparams import Constant, LogUniform, Prior, QUniform

Objective = Callable[[dict[str, Any]], float]


@dataclass(frozen=True)
class Evaluation:
    values: dict[str, Any]
    objective: float


def _tunable(priors: Mapping[str, Prior]) -> list[str]:
    return [name for name, prior in priors.items() if not isinstance(prior, Constant)]


def _to_internal(prior: Prior, value: float) -> float:
    return math.log(value) if isinstance(prior, LogUniform) else float(value)


def _from_internal(prior: Prior, value: float) -> float:
    if isinstance(prior, LogUniform):
        return float(np.clip(math.exp(value), prior.low, prior.high))
    assert isinstance(prior, QUniform)
    return float(np.clip(round(value / prior.q) * prior.q, prior.low, prior.high))


def _span(prior: Prior) -> tuple[float, float]:
    if isinstance(prior, LogUniform):
        return math.log(prior.low), math.log(prior.high)
    assert isinstance(prior, QUniform)
    return prior.low, prior.high


def _sample_point(priors: Mapping[str, Prior], rng: np.random.Generator) -> dict[str, Any]:
    return {name: prior.sample(rng) for name, prior in priors.items()}


def _kde_logpdf(point: np.ndarray, data: np.ndarray, bandwidths: np.ndarray) -> float:
    if data.shape[0] == 0:
        return 0.0
    z = (point[None, :] - data) / bandwidths[None, :]
    log_k = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(bandwidths))
    peak = np.max(log_k)
    return float(peak + np.log(np.mean(np.exp(log_k - peak))))


def tune_bo(
    objective: Objective,
    priors: Mapping[str, Prior],
    budget: int = 10,
    seed: int = 0,
    n_init: int = 3,
    n_candidates: int = 50,
) -> tuple[dict[str, Any], list[Evaluation]]:
    """Minimize ``objective`` over the priors; returns (best values, history).

    Deterministic given ``seed``; len(history) == budget exactly.
    """
    if budget < 1:
        raise ModelError("tuning budget must be >= 1")
    rng = np.random.default_rng(seed)
    names = _tunable(priors)
    history: list[Evaluation] = []

    def evaluate(values: dict[str, Any]) -> None:
        history.append(Evaluation(values, float(objective(values))))

    for _ in range(min(n_init, budget)):
        evaluate(_sample_point(priors, rng))

    while len(history) < budget:
        if not names:  # all-constant space: nothing to search
            evaluate(_sample_point(priors, rng))
            continue
        ranked = sorted(history, key=lambda e: e.objective)
        n_good = max(1, math.ceil(0.25 * len(ranked)))
        good = np.array(
            [[_to_internal(priors[n], e.values[n]) for n in names] for e in ranked[:n_good]]
        )
        bad = np.array(
            [[_to_internal(priors[n], e.values[n]) for n in names] for e in ranked[n_good:]]
        ).reshape(len(ranked) - n_good, len(names))
        spans = np.array([_span(priors[n]) for n in names])
        widths = spans[:, 1] - spans[:, 0]
        # bandwidth narrows as evidence accumulates but tracks the good-point spread
        bandwidths = np.maximum.reduce(
            [
                np.std(good, axis=0),
                widths / (2.0 * len(history)),
                1e-6 * np.maximum(widths, 1.0),
            ]
        )

        best_candidate, best_score = None, -np.inf
        for _ in range(n_candidates):
            anchor = good[rng.integers(0, good.shape[0])]
            internal = anchor + rng.normal(0.0, bandwidths)
            internal = np.clip(internal, spans[:, 0], spans[:, 1])
            score = _kde_logpdf(internal, good, bandwidths) - _kde_logpdf(
                internal, bad, bandwidths
            )
            if score > best_score:
                best_candidate, best_score = internal, score
        values = _sample_point(priors, rng)  # constants and fallback values
        for i, name in enumerate(names):
            values[name] = _from_internal(priors[name], float(best_candidate[i]))
        evaluate(values)

    best = min(history, key=lambda e: e.objective)
    return dict(best.values), history
