"""Deterministic discrete-event simulator of bucket-triggered serverless workflow execution.

Components form a chain of stages (a partitioned component contributes one stage
per partition). Every job that completes a stage immediately becomes an arrival
at the next stage; jobs dispatch FIFO whenever a pod slot is free. The first use
of a cold pod pays pod creation plus container-start overhead once; reused or
pre-warmed pods pay neither. Async workloads upload the whole batch at t=0; sync
workloads inject arrivals on the first stage only.

Each job yields a timeline record with four intervals (wait, pod creation,
overhead, compute) satisfying end = upload + wait + pod_creation + overhead + compute.
The simulated clock is real-valued seconds. One simulation is single-threaded and
bit-deterministic given (configuration, laws, seed).
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .errors import ConfigurationError, SimulationError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .workflow import Resource, RunConfiguration, WorkflowSpec

DEFAULT_QUEUE_CAP = 10_000

_SCALES = ("unit", "cores", "inv_cores")
_NOISES = ("none", "normal", "lognormal")


@dataclass(frozen=True)
class ServiceLaw:
    """Parametric ground-truth service time of one stage.

    compute = (base + per_core_coefficient * scale_term + batch_coefficient * batch)
    where scale_term is 1, the stage's core count, or its reciprocal, depending on
    ``scale``. Noise multiplies the deterministic value: ``normal`` draws the factor
    from Normal(1, sigma), ``lognormal`` from exp(Normal(0, sigma)); samples are
    clamped at 0 so a duration can never be negative.
    """

    base: float = 0.0
    per_core_coefficient: float = 0.0
    scale: str = "unit"
    batch_coefficient: float = 0.0
    noise: str = "none"
    sigma: float = 0.0
    pod_creation: float = 0.0
    overhead: float = 0.0

    def __post_init__(self):
        if self.scale not in _SCALES:
            raise ConfigurationError(f"service law: unknown scale {self.scale!r}")
        if self.noise not in _NOISES:
            raise ConfigurationError(f"service law: unknown noise {self.noise!r}")
        for name in ("base", "pod_creation", "overhead", "sigma"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"service law: {name} must be >= 0")

    def mean_compute(self, cores: int | None, batch_size: int | None) -> float:
        if self.scale == "unit":
            term = 1.0
        else:
            if cores is None:
                raise SimulationError(
                    f"service law scale {self.scale!r} needs a bounded parallelism level"
                )
            term = float(cores) if self.scale == "cores" else 1.0 / float(cores)
        value = self.base + self.per_core_coefficient * term
        if self.batch_coefficient:
            if batch_size is None:
                raise SimulationError("service law has a batch term but the workload has no batch")
            value += self.batch_coefficient * batch_size
        return value

    def sample_compute(self, rng: np.random.Generator, cores: int | None, batch_size: int | None) -> float:
        value = self.mean_compute(cores, batch_size)
        if self.noise == "normal":
            value *= rng.normal(1.0, self.sigma)
        elif self.noise == "lognormal":
            value *= math.exp(rng.normal(0.0, self.sigma))
        return max(value, 0.0)


@dataclass(frozen=True)
class WorkloadSpec:
    """How jobs enter the first stage: a batch at t=0 or a timed arrival process."""

    mode: str = "async_batch"
    batch_size: int = 1
    arrival: str = "constant"
    rate: float = 1.0
    duration: float = 0.0
    ramp_up: float = 0.0

    def __post_init__(self):
        if self.mode not in ("async_batch", "sync"):
            raise ConfigurationError(f"workload: unknown mode {self.mode!r}")
        if self.mode == "async_batch":
            if self.batch_size < 1:
                raise ConfigurationError("workload: batch_size must be >= 1")
        else:
            if self.arrival not in ("constant", "exponential"):
                raise ConfigurationError(f"workload: unknown arrival {self.arrival!r}")
            if self.rate <= 0:
                raise ConfigurationError("workload: rate must be > 0")
            if self.duration <= 0:
                raise ConfigurationError("workload: duration must be > 0")
            if not 0 <= self.ramp_up < self.duration:
                raise ConfigurationError("workload: need 0 <= ramp_up < duration")


@dataclass(frozen=True)
class JobRecord:
    """Timeline of one job on one stage; all four intervals are >= 0."""

    job_id: int
    component: str
    upload_time: float
    wait: float
    pod_creation: float
    overhead: float
    compute: float
    measured: bool = True

    @property
    def start_time(self) -> float:
        """Instant the application code starts executing."""
        return self.upload_time + self.wait + self.pod_creation + self.overhead

    @property
    def end_time(self) -> float:
        return self.start_time + self.compute

    @property
    def response(self) -> float:
        return self.end_time - self.upload_time


@dataclass(frozen=True)
class RunTrace:
    """All job records of one simulated run."""

    configuration: "RunConfiguration"
    seed: int
    jobs: tuple[JobRecord, ...]
    stage_components: Mapping[str, str]  # stage name -> owning component
    workload: WorkloadSpec
    saturated: bool = False

    def stage_names(self) -> list[str]:
        return list(self.stage_components)

    def jobs_of(self, name: str | None) -> list[JobRecord]:
        """Records of one stage, of one component (all its stages), or all."""
        if name is None:
            return list(self.jobs)
        if name in self.stage_components:
            return [j for j in self.jobs if j.component == name]
        owned = {s for s, c in self.stage_components.items() if c == name}
        if not owned:
            raise SimulationError(f"trace has no component or stage named {name!r}")
        return [j for j in self.jobs if j.component in owned]

    def completion_times(self, name: str | None = None) -> list[float]:
        return sorted(j.end_time for j in self.jobs_of(name))


@dataclass
class _Stage:
    name: str
    component: str
    resource: "Resource"
    parallelism: int | None  # None = unbounded
    law: ServiceLaw
    transfer_delay: float  # applied between this stage and the next one of the same component

    # runtime state
    queue: deque = field(default_factory=deque)
    free_warm: int = 0
    free_cold: int = 0  # bounded pools only; unbounded stages mint cold slots on demand
    busy: int = 0

    def reset(self, prewarm: int) -> None:
        self.queue = deque()
        self.busy = 0
        if self.parallelism is None:
            self.free_warm, self.free_cold = 0, 0
        else:
            self.free_warm = prewarm
            self.free_cold = self.parallelism - prewarm

    def has_free_slot(self) -> bool:
        return self.parallelism is None or self.free_warm > 0 or self.free_cold > 0

    def take_slot(self) -> bool:
        """Occupy a slot; returns True when it is warm (no cold-start cost)."""
        if self.parallelism is None:
            self.busy += 1
            if self.free_warm > 0:
                self.free_warm -= 1
                return True
            return False
        if self.free_warm > 0:
            self.free_warm -= 1
            self.busy += 1
            return True
        self.free_cold -= 1
        self.busy += 1
        return False

    def release_slot(self) -> None:
        self.busy -= 1
        self.free_warm += 1  # a pod that served a job stays warm


def build_stages(
    config: "RunConfiguration",
    laws: Mapping[str, ServiceLaw],
    workflow: "WorkflowSpec",
    component: str | None = None,
) -> list[_Stage]:
    """Flatten a run configuration into the ordered stage chain it executes.

    ``laws`` is keyed by stage name (component, or partition for partitioned
    components) with a fallback to the owning component's entry. ``component``
    restricts the chain to one component's stages (single-component profiling).
    """
    stages: list[_Stage] = []
    for unit in config.deployment.units:
        if component is not None and unit.component != component:
            continue
        comp = workflow.component(unit.component)
        placements = unit.placement
        for idx, (target, resource_name) in enumerate(placements):
            law = laws.get(target) or laws.get(unit.component)
            if law is None:
                raise SimulationError(f"no service law for stage {target!r}")
            resource = workflow.resource(resource_name)
            level = config.level_for(target)
            if not resource.unbounded and level is None:
                raise SimulationError(f"stage {target!r}: missing parallelism level")
            delay = 0.0
            if len(placements) > 1 and idx < len(placements) - 1:
                delay = comp.partitions[idx].transfer_delay
            stages.append(_Stage(target, unit.component, resource, level, law, delay))
    if not stages:
        raise SimulationError(
            f"configuration has no stages to run (component filter {component!r})"
        )
    return stages


def _arrival_times(workload: WorkloadSpec, rng: np.random.Generator) -> list[tuple[float, bool]]:
    """Injection times on the first stage, with the measured flag (past ramp-up)."""
    if workload.mode == "async_batch":
        return [(0.0, True)] * workload.batch_size
    times: list[tuple[float, bool]] = []
    if workload.arrival == "constant":
        step = 1.0 / workload.rate
        t, i = 0.0, 0
        while t < workload.duration:
            times.append((t, t >= workload.ramp_up))
            i += 1
            t = i * step
    else:
        t = 0.0
        while True:
            t += rng.exponential(1.0 / workload.rate)
            if t >= workload.duration:
                break
            times.append((t, t >= workload.ramp_up))
    if not times:
        raise SimulationError("sync workload produced zero arrivals")
    return times


def simulate_run(
    config: "RunConfiguration",
    laws: Mapping[str, ServiceLaw],
    seed: int,
    workflow: "WorkflowSpec",
    component: str | None = None,
    queue_cap: int = DEFAULT_QUEUE_CAP,
) -> RunTrace:
    """Run one configuration and return the full job-level trace.

    Event-driven semantics: every completion immediately enqueues one arrival at
    the successor stage (plus the partition transfer delay when crossing partition
    boundaries inside a component). Pre-warmed pods exist on the first stage only,
    floor(warm_fraction * parallelism) of them. A queue growing past ``queue_cap``
    sets the saturation flag but never aborts the run.
    """
    if config.workload is None:
        raise SimulationError("run configuration has no workload")
    workload = config.workload
    stages = build_stages(config, laws, workflow, component)
    rng = np.random.default_rng(seed)

    first = stages[0]
    prewarm = 0
    if first.parallelism is not None:
        prewarm = math.floor(first.resource.warm_fraction * first.parallelism)
    for idx, stage in enumerate(stages):
        stage.reset(prewarm if idx == 0 else 0)

    records: list[JobRecord] = []
    saturated = False
    heap: list[tuple[float, int, int, int, int, bool]] = []
    seq = 0

    # event tuple: (time, seq, kind, stage_idx, job_id, measured); kind 0=completion, 1=arrival
    def push(time: float, kind: int, stage_idx: int, job_id: int, measured: bool) -> None:
        nonlocal seq
        heapq.heappush(heap, (time, seq, kind, stage_idx, job_id, measured))
        seq += 1

    def dispatch(stage_idx: int, job_id: int, upload: float, now: float, measured: bool) -> None:
        stage = stages[stage_idx]
        warm = stage.take_slot()
        pod_creation = 0.0 if warm else stage.law.pod_creation + stage.resource.cold_start_overhead
        overhead = 0.0 if warm else stage.law.overhead
        batch = workload.batch_size if workload.mode == "async_batch" else None
        compute = stage.law.sample_compute(rng, stage.parallelism, batch)
        record = JobRecord(
            job_id=job_id,
            component=stage.name,
            upload_time=upload,
            wait=now - upload,
            pod_creation=pod_creation,
            overhead=overhead,
            compute=compute,
            measured=measured,
        )
        records.append(record)
        push(record.end_time, 0, stage_idx, job_id, measured)

    for job_id, (t, measured) in enumerate(_arrival_times(workload, rng)):
        push(t, 1, 0, job_id, measured)

    while heap:
        now, _, kind, stage_idx, job_id, measured = heapq.heappop(heap)
        stage = stages[stage_idx]
        if kind == 1:  # arrival
            if stage.has_free_slot():
                dispatch(stage_idx, job_id, now, now, measured)
            else:
                stage.queue.append((job_id, now, measured))
                if len(stage.queue) > queue_cap:
                    saturated = True
        else:  # completion
            stage.release_slot()
            if stage.queue:
                next_id, upload, next_measured = stage.queue.popleft()
                dispatch(stage_idx, next_id, upload, now, next_measured)
            if stage_idx + 1 < len(stages):
                delay = stage.transfer_delay if stages[stage_idx + 1].component == stage.component else 0.0
                push(now + delay, 1, stage_idx + 1, job_id, measured)

    records.sort(key=lambda r: (r.upload_time, r.job_id, r.component))
    return RunTrace(
        configuration=config,
        seed=seed,
        jobs=tuple(records),
        stage_components={s.name: s.component for s in stages},
        workload=workload,
        saturated=saturated,
    )


def makespan(trace: RunTrace, component: str | None = None) -> float:
    """Interval between the first upload and the last completion of the (filtered) jobs."""
    jobs = trace.jobs_of(component)
    if not jobs:
        raise SimulationError("makespan of an empty trace")
    return max(j.end_time for j in jobs) - min(j.upload_time for j in jobs)


def _output_stage(trace: RunTrace, component: str | None) -> str:
    """Stage whose completions are the output of ``component`` (or of the workflow)."""
    names = trace.stage_names()
    if component is None:
        return names[-1]
    if component in trace.stage_components:
        return component
    owned = [s for s in names if trace.stage_components[s] == component]
    if not owned:
        raise SimulationError(f"trace has no component or stage named {component!r}")
    return owned[-1]


def measure_throughput(trace: RunTrace, component: str | None = None) -> float:
    """Output rate of a component within the post-ramp-up measurement window.

    Counts completions of the component's last stage whose end time falls inside
    [ramp_up, duration], divided by the window length.
    """
    workload = trace.workload
    if workload.mode != "sync":
        raise SimulationError("throughput is only defined for sync traces")
    jobs = trace.jobs_of(_output_stage(trace, component))
    if not jobs:
        raise SimulationError(f"no jobs of {component!r} to measure")
    window = workload.duration - workload.ramp_up
    if window <= 0:
        raise SimulationError("empty measurement window")
    count = sum(1 for j in jobs if workload.ramp_up <= j.end_time <= workload.duration)
    return count / window


def workflow_response_times(trace: RunTrace) -> list[float]:
    """Per measured job: last completion minus first upload, across all stages."""
    bounds: dict[int, tuple[float, float, bool]] = {}
    for job in trace.jobs:
        lo, hi, measured = bounds.get(job.job_id, (math.inf, -math.inf, job.measured))
        bounds[job.job_id] = (min(lo, job.upload_time), max(hi, job.end_time), measured)
    times = [hi - lo for lo, hi, measured in bounds.values() if measured]
    if not times:
        raise SimulationError("no measured jobs in trace")
    return times


def average_response(trace: RunTrace, component: str | None = None) -> float:
    """Mean per-job response (wait + cold costs + compute) over measured jobs."""
    jobs = [j for j in trace.jobs_of(component) if j.measured]
    if not jobs:
        raise SimulationError("no measured jobs to average")
    return sum(j.response for j in jobs) / len(jobs)


def average_compute(trace: RunTrace, component: str | None = None) -> float:
    """Mean per-job compute interval over measured jobs."""
    jobs = [j for j in trace.jobs_of(component) if j.measured]
    if not jobs:
        raise SimulationError("no measured jobs to average")
    return sum(j.compute for j in jobs) / len(jobs)
