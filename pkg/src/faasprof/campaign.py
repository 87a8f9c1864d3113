"""Profiling-campaign planning, checkpointed execution, and CSV emission.

A campaign profiles every selected run configuration with the full workflow
first, then (optionally) each component in isolation against a synthetic input
feed, repeating everything R times. Completed runs are checkpointed to a JSON
state file and their traces archived one JSON file per run, so an interrupted
campaign resumes with exactly the remaining runs and reproduces identical CSVs.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ConfigurationError, FaasprofError
from .seeding import derive_seed
from .simulator import (
    DEFAULT_QUEUE_CAP,
    JobRecord,
    RunTrace,
    ServiceLaw,
    WorkloadSpec,
    makespan,
    measure_throughput,
    simulate_run,
    workflow_response_times,
)
from .workflow import RunConfiguration, WorkflowSpec

JOBS_HEADER = (
    "run_id,component,resource,cores,batch_size,lambda,rep,"
    "wait_s,pod_creation_s,overhead_s,compute_s,runtime_s"
)
SUMMARY_HEADER = (
    "run_id,component,resource,cores,batch_size,lambda,rep,"
    "runtime_s,throughput_rps,avg_response_s,avg_compute_s"
)

WORKFLOW_SCOPE = "workflow"


@dataclass(frozen=True)
class PlannedRun:
    run_id: str
    config_index: int
    config: RunConfiguration
    scope: str  # WORKFLOW_SCOPE or a component name
    repetition: int


@dataclass(frozen=True)
class CampaignPlan:
    runs: tuple[PlannedRun, ...]
    repetitions: int
    digest: str

    def __len__(self) -> int:
        return len(self.runs)


def _config_fingerprint(config: RunConfiguration) -> str:
    return f"{config.describe()}|{config.workload}"


def plan_campaign(
    configs: Sequence[RunConfiguration],
    repetitions: int = 3,
    single_components: Sequence[str] = (),
    extra_digest: str = "",
) -> CampaignPlan:
    """Deterministic plan: per configuration, R full-workflow runs then R runs
    per listed component; raises when there is nothing to run."""
    if not configs:
        raise ConfigurationError("campaign has zero configurations to profile")
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    runs: list[PlannedRun] = []
    for index, config in enumerate(configs):
        for rep in range(1, repetitions + 1):
            runs.append(PlannedRun(f"c{index:04d}-workflow-r{rep}", index, config, WORKFLOW_SCOPE, rep))
        for component in single_components:
            for rep in range(1, repetitions + 1):
                runs.append(
                    PlannedRun(f"c{index:04d}-{component}-r{rep}", index, config, component, rep)
                )
    hasher = hashlib.sha256(extra_digest.encode())
    hasher.update(str(repetitions).encode())
    for config in configs:
        hasher.update(_config_fingerprint(config).encode())
    for component in single_components:
        hasher.update(component.encode())
    return CampaignPlan(tuple(runs), repetitions, hasher.hexdigest())


class SimulationBackend:
    """Executes planned runs on the built-in discrete-event simulator."""

    def __init__(
        self,
        workflow: WorkflowSpec,
        laws: Mapping[str, ServiceLaw],
        base_seed: int = 0,
        queue_cap: int = DEFAULT_QUEUE_CAP,
    ):
        self.workflow = workflow
        self.laws = dict(laws)
        self.base_seed = base_seed
        self.queue_cap = queue_cap

    def execute(self, run: PlannedRun) -> RunTrace:
        component = None if run.scope == WORKFLOW_SCOPE else run.scope
        return simulate_run(
            run.config,
            self.laws,
            derive_seed(self.base_seed, run.run_id),
            self.workflow,
            component=component,
            queue_cap=self.queue_cap,
        )


@dataclass(frozen=True)
class StageInfo:
    name: str
    component: str
    resource: str
    cores: int | None


@dataclass(frozen=True)
class RunResult:
    """Archived outcome of one run: enough to rebuild every CSV row."""

    run_id: str
    workflow_name: str
    scope: str
    repetition: int
    seed: int
    stages: tuple[StageInfo, ...]
    workload: WorkloadSpec
    jobs: tuple[JobRecord, ...]
    saturated: bool

    @classmethod
    def from_trace(cls, run: PlannedRun, trace: RunTrace, workflow: WorkflowSpec) -> "RunResult":
        stages = []
        for unit in run.config.deployment.units:
            if run.scope != WORKFLOW_SCOPE and unit.component != run.scope:
                continue
            for target, resource in unit.placement:
                stages.append(StageInfo(target, unit.component, resource, run.config.level_for(target)))
        return cls(
            run_id=run.run_id,
            workflow_name="+".join(c.name for c in workflow.components),
            scope=run.scope,
            repetition=run.repetition,
            seed=trace.seed,
            stages=tuple(stages),
            workload=trace.workload,
            jobs=trace.jobs,
            saturated=trace.saturated,
        )

    def to_trace(self) -> RunTrace:
        """Rebuild a RunTrace view (no configuration attached) for the analysis helpers."""
        return RunTrace(
            configuration=None,  # type: ignore[arg-type]  # archives drop the config object
            seed=self.seed,
            jobs=self.jobs,
            stage_components={s.name: s.component for s in self.stages},
            workload=self.workload,
            saturated=self.saturated,
        )

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "workflow": self.workflow_name,
            "scope": self.scope,
            "repetition": self.repetition,
            "seed": self.seed,
            "stages": [
                {"name": s.name, "component": s.component, "resource": s.resource, "cores": s.cores}
                for s in self.stages
            ],
            "workload": {
                "mode": self.workload.mode,
                "batch_size": self.workload.batch_size,
                "arrival": self.workload.arrival,
                "rate": self.workload.rate,
                "duration": self.workload.duration,
                "ramp_up": self.workload.ramp_up,
            },
            "saturated": self.saturated,
            "jobs": [
                [j.job_id, j.component, j.upload_time, j.wait, j.pod_creation, j.overhead, j.compute, j.measured]
                for j in self.jobs
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "RunResult":
        return cls(
            run_id=payload["run_id"],
            workflow_name=payload["workflow"],
            scope=payload["scope"],
            repetition=payload["repetition"],
            seed=payload["seed"],
            stages=tuple(
                StageInfo(s["name"], s["component"], s["resource"], s["cores"])
                for s in payload["stages"]
            ),
            workload=WorkloadSpec(**payload["workload"]),
            jobs=tuple(JobRecord(*row) for row in payload["jobs"]),
            saturated=payload["saturated"],
        )


class CampaignState:
    """Checkpoint file: which run ids finished or failed, under which plan digest."""

    def __init__(self, path: Path, digest: str):
        self.path = Path(path)
        self.digest = digest
        self.completed: list[str] = []
        self.failed: dict[str, str] = {}
        self._lock = threading.Lock()

    @classmethod
    def load_or_create(cls, path: Path, digest: str) -> "CampaignState":
        state = cls(path, digest)
        if state.path.exists():
            payload = json.loads(state.path.read_text())
            if payload.get("digest") != digest:
                raise ConfigurationError(
                    f"checkpoint {path} belongs to a different campaign configuration; "
                    "refusing to resume"
                )
            state.completed = list(payload.get("completed", []))
            state.failed = dict(payload.get("failed", {}))
        return state

    def record(self, run_id: str, error: str | None = None) -> None:
        with self._lock:
            if error is None:
                if run_id not in self.completed:
                    self.completed.append(run_id)
            else:
                self.failed[run_id] = error
            payload = {"digest": self.digest, "completed": self.completed, "failed": self.failed}
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, indent=1))
            tmp.replace(self.path)


def _trace_path(traces_dir: Path, run_id: str) -> Path:
    return traces_dir / f"{run_id}.json"


def execute_campaign(
    plan: CampaignPlan,
    backend,
    state_path: Path,
    traces_dir: Path,
    jobs: int = 1,
    on_run: Callable[[str, str], None] | None = None,
) -> list[RunResult]:
    """Execute (or resume) a plan; returns results of completed runs in plan order.

    Every finished run is archived to ``traces_dir/<run_id>.json`` and checkpointed
    before the next one is reported. A backend failure marks the run failed and the
    campaign continues. Independent runs may execute on up to ``jobs`` workers;
    results and checkpoints are still committed deterministically in plan order.
    """
    state_path = Path(state_path)
    traces_dir = Path(traces_dir)
    traces_dir.mkdir(parents=True, exist_ok=True)
    state = CampaignState.load_or_create(state_path, plan.digest)

    results: dict[str, RunResult] = {}
    pending: list[PlannedRun] = []
    for run in plan.runs:
        archive = _trace_path(traces_dir, run.run_id)
        if run.run_id in state.completed and archive.exists():
            results[run.run_id] = RunResult.from_json(json.loads(archive.read_text()))
            if on_run:
                on_run(run.run_id, "skipped")
        else:
            pending.append(run)

    def run_one(run: PlannedRun) -> tuple[PlannedRun, RunResult | None, str | None]:
        try:
            trace = backend.execute(run)
            return run, RunResult.from_trace(run, trace, backend.workflow), None
        except FaasprofError as exc:
            return run, None, str(exc)

    def commit(run: PlannedRun, result: RunResult | None, error: str | None) -> None:
        if error is not None:
            state.record(run.run_id, error=error)
            if on_run:
                on_run(run.run_id, f"failed: {error}")
            return
        payload = json.dumps(result.to_json())
        _trace_path(traces_dir, run.run_id).write_text(payload)
        state.record(run.run_id)
        results[run.run_id] = result
        if on_run:
            on_run(run.run_id, "done")

    if jobs <= 1:
        for run in pending:
            commit(*run_one(run))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for run, result, error in pool.map(run_one, pending):
                commit(run, result, error)

    return [results[r.run_id] for r in plan.runs if r.run_id in results]


@dataclass(frozen=True)
class ProfilingDataset:
    """Paths and row counts of the CSV files one campaign produced."""

    jobs_path: Path
    summary_path: Path
    failures_path: Path | None
    job_rows: int
    summary_rows: int


def _fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.6f}"


def _workload_columns(workload: WorkloadSpec) -> tuple[str, str]:
    if workload.mode == "async_batch":
        return str(workload.batch_size), ""
    return "", _fmt(workload.rate)


def traces_to_csv(
    results: Iterable[RunResult],
    output_dir: Path,
    failures: Mapping[str, str] | None = None,
) -> ProfilingDataset:
    """Merge run results into ``jobs.csv`` (one row per job) and ``run_summary.csv``
    (one row per stage plus one whole-workflow row per full run).

    Only measured jobs (past ramp-up) are written. Failed runs never reach the
    CSVs; they are listed in a ``failures.txt`` sidecar instead.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    results = list(results)
    workflows = {r.workflow_name for r in results}
    if len(workflows) > 1:
        raise ConfigurationError(f"cannot merge traces of different workflows: {sorted(workflows)}")

    job_lines = [JOBS_HEADER]
    summary_lines = [SUMMARY_HEADER]
    for result in results:
        trace = result.to_trace()
        batch_col, rate_col = _workload_columns(result.workload)
        rep = str(result.repetition)
        stage_by_name = {s.name: s for s in result.stages}
        for job in result.jobs:
            if not job.measured:
                continue
            stage = stage_by_name[job.component]
            job_lines.append(
                ",".join(
                    [
                        result.run_id,
                        job.component,
                        stage.resource,
                        "" if stage.cores is None else str(stage.cores),
                        batch_col,
                        rate_col,
                        rep,
                        _fmt(job.wait),
                        _fmt(job.pod_creation),
                        _fmt(job.overhead),
                        _fmt(job.compute),
                        _fmt(job.response),
                    ]
                )
            )

        sync = result.workload.mode == "sync"
        for stage in result.stages:
            measured = [j for j in result.jobs if j.component == stage.name and j.measured]
            if not measured:
                continue
            throughput = measure_throughput(trace, stage.name) if sync else None
            summary_lines.append(
                ",".join(
                    [
                        result.run_id,
                        stage.name,
                        stage.resource,
                        "" if stage.cores is None else str(stage.cores),
                        batch_col,
                        rate_col,
                        rep,
                        _fmt(makespan(trace, stage.name)),
                        _fmt(throughput),
                        _fmt(sum(j.response for j in measured) / len(measured)),
                        _fmt(sum(j.compute for j in measured) / len(measured)),
                    ]
                )
            )
        if result.scope == WORKFLOW_SCOPE:
            responses = workflow_response_times(trace)
            per_job_compute: dict[int, float] = {}
            for job in result.jobs:
                if job.measured:
                    per_job_compute[job.job_id] = per_job_compute.get(job.job_id, 0.0) + job.compute
            throughput = measure_throughput(trace, None) if sync else None
            summary_lines.append(
                ",".join(
                    [
                        result.run_id,
                        "",
                        "",
                        "",
                        batch_col,
                        rate_col,
                        rep,
                        _fmt(makespan(trace)),
                        _fmt(throughput),
                        _fmt(sum(responses) / len(responses)),
                        _fmt(sum(per_job_compute.values()) / len(per_job_compute)),
                    ]
                )
            )

    jobs_path = output_dir / "jobs.csv"
    summary_path = output_dir / "run_summary.csv"
    jobs_path.write_text("\n".join(job_lines) + "\n")
    summary_path.write_text("\n".join(summary_lines) + "\n")

    failures_path = None
    if failures:
        failures_path = output_dir / "failures.txt"
        failures_path.write_text(
            "\n".join(f"{run_id}: {message}" for run_id, message in sorted(failures.items())) + "\n"
        )
    return ProfilingDataset(
        jobs_path, summary_path, failures_path, len(job_lines) - 1, len(summary_lines) - 1
    )
