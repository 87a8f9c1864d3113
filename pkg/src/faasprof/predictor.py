"""Composes per-component models into full-workflow predictions.

Async (batch) workflows: component runtimes overlap because a downstream stage
starts as soon as the first upstream job lands. Summing isolated runtimes is
therefore conservative; the sum is corrected by subtracting each predecessor's
average single-job compute time, and clamped below at the largest single
component runtime.

Sync workflows: a saturated component forwards fewer requests per second than it
receives, so each stage is evaluated at the propagated rate
lambda_k = min(lambda_{k-1}, predicted output rate), never at the raw input rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import ModelError
from .model_io import TrainedModel
from .workflow import RunConfiguration, WorkflowSpec

#: feature column names shared with the campaign CSVs
CORES = "cores"
RATE = "lambda"
BATCH = "batch_size"


@dataclass(frozen=True)
class ComponentModels:
    """Trained models of one component; only the relevant subset needs to exist."""

    runtime: TrainedModel | None = None  # async: batch runtime
    avg_compute: TrainedModel | None = None  # async: mean single-job compute time
    response: TrainedModel | None = None  # sync: mean per-request time T(lambda, cores)
    throughput: TrainedModel | None = None  # sync: output rate (lambda, cores)


@dataclass(frozen=True)
class ComponentModelSet:
    components: tuple[str, ...]  # chain order
    models: dict[str, ComponentModels] = field(default_factory=dict)

    def of(self, component: str) -> ComponentModels:
        try:
            return self.models[component]
        except KeyError:
            raise ModelError(f"no models registered for component {component!r}") from None


def predict_component(model: TrainedModel, features: Mapping[str, float]) -> float:
    """Single-model inference from raw configuration features."""
    return model.predict_row(features)


def features_from_config(
    config: RunConfiguration,
    workflow: WorkflowSpec,
    batch_size: int | None = None,
) -> dict[str, dict[str, float]]:
    """Per-stage feature mappings (cores, batch size) for a run configuration."""
    features: dict[str, dict[str, float]] = {}
    for unit in config.deployment.units:
        for target, resource_name in unit.placement:
            row: dict[str, float] = {}
            level = config.level_for(target)
            if level is not None:
                row[CORES] = float(level)
            if batch_size is not None:
                row[BATCH] = float(batch_size)
            features[target] = row
    return features


def predict_async_workflow(
    models: ComponentModelSet,
    features: Mapping[str, Mapping[str, float]],
    batch_size: int | None = None,
) -> float:
    """Pipeline-effect-corrected batch runtime for the whole chain.

    total = sum(R_k) - sum_{k>=2}(avg job time of component k-1), clamped below
    at max(R_k). Negative intermediate predictions are model defects and raise.
    """
    runtimes: list[float] = []
    avg_jobs: list[float] = []
    for name in models.components:
        entry = models.of(name)
        if entry.runtime is None:
            raise ModelError(f"component {name!r} has no runtime model")
        row = _component_features(features, name, batch_size)
        runtime = entry.runtime.predict_row(row)
        if runtime < 0:
            raise ModelError(f"runtime model of {name!r} predicted {runtime:.3f} s < 0")
        runtimes.append(runtime)
        if entry.avg_compute is not None:
            avg = entry.avg_compute.predict_row(row)
            if avg < 0:
                raise ModelError(f"average-job model of {name!r} predicted {avg:.3f} s < 0")
            avg_jobs.append(avg)
        else:
            avg_jobs.append(0.0)

    total = sum(runtimes)
    for k in range(1, len(models.components)):
        total -= avg_jobs[k - 1]
    return max(total, max(runtimes))


def predict_sync_workflow(
    models: ComponentModelSet,
    features: Mapping[str, Mapping[str, float]],
    lambda_in: float,
    propagate: bool = True,
) -> float:
    """Per-request response time of the chain under arrival rate ``lambda_in``.

    With ``propagate`` (the default), each stage sees the minimum of its
    predecessor's rate and that predecessor's predicted output rate; disabling it
    feeds the raw input rate everywhere (the conservative baseline).
    """
    if lambda_in <= 0:
        raise ModelError("lambda_in must be > 0")
    rate = lambda_in
    total = 0.0
    for name in models.components:
        entry = models.of(name)
        if entry.response is None:
            raise ModelError(f"component {name!r} has no response-time model")
        row = dict(_component_features(features, name, None))
        row[RATE] = rate
        total += entry.response.predict_row(row)
        if entry.throughput is not None:
            out_rate = entry.throughput.predict_row(row)
            if out_rate <= 0:
                raise ModelError(f"throughput model of {name!r} predicted {out_rate:.4f} <= 0")
            if propagate:
                rate = min(rate, out_rate)
    return total


def _component_features(
    features: Mapping[str, Mapping[str, float]],
    name: str,
    batch_size: int | None,
) -> dict[str, float]:
    if name not in features:
        raise ModelError(f"no configuration features for component {name!r}")
    row = dict(features[name])
    if batch_size is not None and BATCH not in row:
        row[BATCH] = float(batch_size)
    return row
