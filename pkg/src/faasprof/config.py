"""Declarative YAML configuration for campaigns and model training.

One dialect serves both files. Parsing is total: every malformed input yields a
ConfigurationError carrying the complete list of problems, never a traceback.
Unknown keys are rejected so typos cannot silently change an experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .campaign import CampaignPlan, SimulationBackend, plan_campaign
from .dataset import FeatureRecipe
from .errors import ConfigurationError, FaasprofError
from .evaluation import TrainingSettings
from .regressors import ALGORITHMS, Constant, LogUniform, QUniform
from .simulator import DEFAULT_QUEUE_CAP, ServiceLaw, WorkloadSpec
from .workflow import (
    Component,
    Partition,
    Resource,
    RunConfiguration,
    WorkflowSpec,
    enumerate_deployments,
    enumerate_testing_units,
    expand_configurations,
    select_training_configurations,
)

_RESOURCE_KEYS = {"cores_per_node", "node_counts", "unbounded", "cold_start_overhead", "warm_fraction"}
_COMPONENT_KEYS = {"name", "resources", "parallelism", "ground_truth", "partitions"}
_PARTITION_KEYS = {"name", "resources", "parallelism", "transfer_delay", "ground_truth"}
_LAW_KEYS = {
    "base",
    "per_core_coefficient",
    "scale",
    "batch_coefficient",
    "noise",
    "sigma",
    "pod_creation",
    "overhead",
}
_WORKLOAD_KEYS = {"mode", "batch_size", "arrival", "rate", "duration", "ramp_up"}
_CAMPAIGN_KEYS = {
    "name",
    "seed",
    "output_dir",
    "repetitions",
    "selection",
    "profile_single_components",
    "queue_cap",
    "resources",
    "components",
    "workload",
}


class _Collector:
    """Accumulates validation problems so they can all be reported at once."""

    def __init__(self):
        self.errors: list[str] = []

    def add(self, message: str) -> None:
        self.errors.append(message)

    def unknown_keys(self, mapping: Mapping, allowed: set[str], where: str) -> None:
        for key in mapping:
            if key not in allowed:
                self.add(f"{where}: unknown key {key!r}")

    def raise_if_any(self) -> None:
        if self.errors:
            raise ConfigurationError(self.errors)


def _load_yaml(path: Path | str) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"no such configuration file: {path}")
    try:
        payload = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return payload


def _parse_law(raw: Any, where: str, errors: _Collector) -> ServiceLaw | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        errors.add(f"{where}: ground_truth must be a mapping")
        return None
    errors.unknown_keys(raw, _LAW_KEYS, where)
    try:
        return ServiceLaw(**{k: v for k, v in raw.items() if k in _LAW_KEYS})
    except (FaasprofError, TypeError) as exc:
        errors.add(f"{where}: {exc}")
        return None


@dataclass(frozen=True)
class CampaignSpec:
    """A fully validated campaign: workflow, grids, laws, workload, run policy."""

    name: str
    workflow: WorkflowSpec
    grids: dict[str, list[int]]
    workload: WorkloadSpec
    laws: dict[str, ServiceLaw]
    repetitions: int = 3
    selection: str = "all"
    profile_single_components: bool = True
    seed: int = 0
    output_dir: Path | None = None
    queue_cap: int = DEFAULT_QUEUE_CAP
    configurations: tuple[RunConfiguration, ...] = field(default=(), compare=False)
    held_out: tuple[RunConfiguration, ...] = field(default=(), compare=False)

    def plan(self) -> CampaignPlan:
        singles = [c.name for c in self.workflow.components] if self.profile_single_components else []
        return plan_campaign(
            list(self.configurations),
            repetitions=self.repetitions,
            single_components=singles,
            extra_digest=f"{self.name}:{self.seed}:{sorted(self.laws.items())!r}",
        )

    def backend(self) -> SimulationBackend:
        return SimulationBackend(self.workflow, self.laws, base_seed=self.seed, queue_cap=self.queue_cap)


def _expand_all(
    workflow: WorkflowSpec, grids: dict[str, list[int]], workload: WorkloadSpec
) -> list[RunConfiguration]:
    units = enumerate_testing_units(workflow)
    configs: list[RunConfiguration] = []
    for deployment in enumerate_deployments(workflow, units):
        configs.extend(expand_configurations(deployment, grids, workflow, workload=workload))
    return configs


def parse_campaign_config(path: Path | str) -> CampaignSpec:
    """Parse and validate a campaign file; every problem is reported, not just the first."""
    raw = _load_yaml(path)
    errors = _Collector()
    errors.unknown_keys(raw, _CAMPAIGN_KEYS, "campaign")

    resources: dict[str, Resource] = {}
    for name, spec in (raw.get("resources") or {}).items():
        spec = spec or {}
        errors.unknown_keys(spec, _RESOURCE_KEYS, f"resource {name}")
        try:
            resources[name] = Resource(
                name=name,
                cores_per_node=spec.get("cores_per_node", 1),
                node_counts=tuple(spec.get("node_counts", (1,))),
                unbounded=spec.get("unbounded", False),
                cold_start_overhead=spec.get("cold_start_overhead", 0.0),
                warm_fraction=spec.get("warm_fraction", 0.0),
            )
        except FaasprofError as exc:
            errors.add(str(exc))
    if not resources:
        errors.add("campaign: no resources defined")

    components: list[Component] = []
    grids: dict[str, list[int]] = {}
    laws: dict[str, ServiceLaw] = {}

    def check_resources(names: Any, where: str) -> frozenset[str]:
        if not isinstance(names, (list, tuple)):
            errors.add(f"{where}: resources must be a list")
            return frozenset()
        unknown = [n for n in names if n not in resources]
        for n in unknown:
            errors.add(f"{where}: undefined resource {n!r}")
        return frozenset(n for n in names if n in resources)

    def check_grid(spec: Mapping, target: str, compat: frozenset[str], where: str) -> None:
        levels = spec.get("parallelism")
        bounded = any(not resources[r].unbounded for r in compat) if compat else False
        if levels is not None:
            if not isinstance(levels, list) or not all(isinstance(l, int) and l > 0 for l in levels):
                errors.add(f"{where}: parallelism must be a list of positive integers")
            elif not bounded and compat:
                errors.add(f"{where}: parallelism given but every resource is unbounded")
            else:
                grids[target] = list(levels)
        elif bounded:
            errors.add(f"{where}: missing parallelism levels for a bounded resource")

    for entry in raw.get("components") or []:
        if not isinstance(entry, dict) or "name" not in entry:
            errors.add("components: each entry needs at least a name")
            continue
        cname = entry["name"]
        where = f"component {cname}"
        errors.unknown_keys(entry, _COMPONENT_KEYS, where)
        compat = check_resources(entry.get("resources", []), where)
        law = _parse_law(entry.get("ground_truth"), where, errors)
        if law is not None:
            laws[cname] = law

        partitions: list[Partition] = []
        for index, part in enumerate(entry.get("partitions") or [], start=1):
            pname = part.get("name", f"{cname}.{index}")
            pwhere = f"partition {pname}"
            errors.unknown_keys(part, _PARTITION_KEYS, pwhere)
            pcompat = check_resources(part.get("resources", []), pwhere)
            try:
                partitions.append(
                    Partition(pname, index, pcompat, part.get("transfer_delay", 0.0))
                )
            except FaasprofError as exc:
                errors.add(str(exc))
                continue
            plaw = _parse_law(part.get("ground_truth"), pwhere, errors)
            if plaw is not None:
                laws[pname] = plaw
            check_grid(part, pname, pcompat, pwhere)

        if compat:
            check_grid(entry, cname, compat, where)
        elif entry.get("parallelism") is not None:
            errors.add(f"{where}: parallelism given but no whole-component resources")
        if not compat and not partitions:
            errors.add(f"{where}: needs resources or partitions")
        if cname not in laws:
            if compat or any(p.name not in laws for p in partitions):
                errors.add(f"{where}: missing ground_truth law (component- or partition-level)")
        try:
            components.append(Component(cname, compat, tuple(partitions)))
        except FaasprofError as exc:
            errors.add(str(exc))

    workload_raw = raw.get("workload") or {}
    errors.unknown_keys(workload_raw, _WORKLOAD_KEYS, "workload")
    workload = None
    try:
        workload = WorkloadSpec(**{k: v for k, v in workload_raw.items() if k in _WORKLOAD_KEYS})
    except (FaasprofError, TypeError) as exc:
        errors.add(f"workload: {exc}")

    selection = raw.get("selection", "all")
    if selection not in ("all", "extremes"):
        errors.add(f"campaign: selection must be all|extremes, not {selection!r}")
    repetitions = raw.get("repetitions", 3)
    if not isinstance(repetitions, int) or repetitions < 1:
        errors.add("campaign: repetitions must be a positive integer")

    errors.raise_if_any()

    workflow = WorkflowSpec(tuple(components), resources)
    try:
        configs = _expand_all(workflow, grids, workload)
        train, test = select_training_configurations(configs, selection)
    except FaasprofError as exc:
        raise ConfigurationError([str(exc)]) from None

    output_dir = raw.get("output_dir")
    return CampaignSpec(
        name=raw.get("name", Path(path).stem),
        workflow=workflow,
        grids=grids,
        workload=workload,
        laws=laws,
        repetitions=repetitions,
        selection=selection,
        profile_single_components=raw.get("profile_single_components", True),
        seed=raw.get("seed", 0),
        output_dir=Path(output_dir) if output_dir else None,
        queue_cap=raw.get("queue_cap", DEFAULT_QUEUE_CAP),
        configurations=tuple(train),
        held_out=tuple(test),
    )


_GENERAL_KEYS = {"seed", "folds", "budget", "target"}
_PREP_KEYS = {
    "input",
    "features",
    "inverse",
    "log",
    "polynomial_degree",
    "one_hot",
    "select",
    "split",
}
_SELECTION_KEYS = {"enabled", "max_features"}
_SPLIT_KEYS = {"kind", "fraction", "seed", "k", "column", "held_values", "threshold"}


def _parse_prior(raw: Any, where: str, errors: _Collector):
    if isinstance(raw, dict):
        if "loguniform" in raw:
            try:
                return LogUniform(*raw["loguniform"])
            except (FaasprofError, TypeError) as exc:
                errors.add(f"{where}: {exc}")
                return None
        if "quniform" in raw:
            try:
                return QUniform(*raw["quniform"])
            except (FaasprofError, TypeError) as exc:
                errors.add(f"{where}: {exc}")
                return None
        errors.add(f"{where}: prior must be a constant, loguniform, or quniform")
        return None
    return Constant(raw)


@dataclass(frozen=True)
class TrainingConfig:
    settings: TrainingSettings
    input_path: Path | None = None


def parse_training_config(path: Path | str) -> TrainingConfig:
    """Parse the sectioned training file (General / DataPreparation / FeatureSelection
    plus optional per-algorithm prior overrides)."""
    raw = _load_yaml(path)
    errors = _Collector()
    allowed_sections = {"General", "DataPreparation", "FeatureSelection", *ALGORITHMS}
    errors.unknown_keys(raw, allowed_sections, "training config")

    general = raw.get("General") or {}
    errors.unknown_keys(general, _GENERAL_KEYS, "General")
    prep = raw.get("DataPreparation") or {}
    errors.unknown_keys(prep, _PREP_KEYS, "DataPreparation")
    feat_sel = raw.get("FeatureSelection") or {}
    errors.unknown_keys(feat_sel, _SELECTION_KEYS, "FeatureSelection")

    transforms: list[dict[str, Any]] = []
    for row in prep.get("select") or []:
        if not isinstance(row, dict) or "column" not in row:
            errors.add("DataPreparation.select: each filter needs a column")
            continue
        transforms.append(
            {
                "kind": "select_rows",
                "column": row["column"],
                "op": row.get("op", "=="),
                "value": row.get("value"),
            }
        )
    transforms += [{"kind": "inverse", "column": c} for c in prep.get("inverse") or []]
    transforms += [{"kind": "log", "column": c} for c in prep.get("log") or []]
    if prep.get("polynomial_degree"):
        transforms.append({"kind": "polynomial_expansion", "degree": prep["polynomial_degree"]})
    transforms += [{"kind": "one_hot", "column": c} for c in prep.get("one_hot") or []]

    split = prep.get("split") or {"kind": "holdout", "fraction": 0.2}
    errors.unknown_keys(split, _SPLIT_KEYS, "DataPreparation.split")

    enabled = feat_sel.get("enabled", "both")
    sfs_modes = {"both": (False, True), "on": (True,), "off": (False,)}.get(enabled)
    if sfs_modes is None:
        errors.add(f"FeatureSelection.enabled must be both|on|off, not {enabled!r}")
        sfs_modes = (False, True)

    priors: dict[str, dict] = {}
    for algorithm in ALGORITHMS:
        section = raw.get(algorithm)
        if not section:
            continue
        parsed = {}
        for hp_name, prior_raw in section.items():
            prior = _parse_prior(prior_raw, f"{algorithm}.{hp_name}", errors)
            if prior is not None:
                parsed[hp_name] = prior
        priors[algorithm] = parsed

    errors.raise_if_any()

    features = prep.get("features")
    try:
        settings = TrainingSettings(
            target=general.get("target", "runtime_s"),
            seed=general.get("seed", 0),
            folds=general.get("folds", 5),
            budget=general.get("budget", 10),
            max_features=feat_sel.get("max_features"),
            sfs_modes=sfs_modes,
            base_features=tuple(features) if features else None,
            recipe=FeatureRecipe(tuple(transforms)),
            split=dict(split),
            priors=priors or None,
        )
    except FaasprofError as exc:
        raise ConfigurationError([str(exc)]) from None
    input_path = prep.get("input")
    return TrainingConfig(settings, Path(input_path) if input_path else None)
