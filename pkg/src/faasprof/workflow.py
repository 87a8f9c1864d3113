"""Workflow/resource data model and enumeration of testing units, deployments and run configurations.

A workflow is an ordered chain of components. Each component either runs whole on
one resource or is split into a sequential chain of partitions, each placed on its
own resource. A testing unit is one valid placement of a component; a deployment
picks one unit per component; a run configuration adds a parallelism level per
bounded component (or partition) plus a workload.

All enumeration here is deterministic: components in declaration order, resources
in lexicographic order. Pure functions over immutable inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import CapacityError, ConfigurationError
from .simulator import ServiceLaw, WorkloadSpec


@dataclass(frozen=True)
class Partition:
    """One stage of a partitioned component; indices form a contiguous 1-based chain."""

    name: str
    index: int
    compatible_resources: frozenset[str]
    transfer_delay: float = 0.0

    def __post_init__(self):
        if self.index < 1:
            raise ConfigurationError(f"partition {self.name}: index must be >= 1")
        if not math.isfinite(self.transfer_delay) or self.transfer_delay < 0:
            raise ConfigurationError(
                f"partition {self.name}: transfer_delay must be finite and >= 0"
            )


@dataclass(frozen=True)
class Component:
    name: str
    compatible_resources: frozenset[str] = frozenset()
    partitions: tuple[Partition, ...] = ()
    ground_truth: ServiceLaw | None = None

    def __post_init__(self):
        indices = [p.index for p in self.partitions]
        if indices != list(range(1, len(indices) + 1)):
            raise ConfigurationError(
                f"component {self.name}: partition indices must be contiguous from 1"
            )
        for part in self.partitions:
            if not part.compatible_resources:
                raise ConfigurationError(
                    f"partition {part.name}: needs at least one compatible resource"
                )


@dataclass(frozen=True)
class Resource:
    """A pool of homogeneous nodes, or an unbounded (Lambda-like) provider."""

    name: str
    cores_per_node: int = 1
    node_counts: tuple[int, ...] = (1,)
    unbounded: bool = False
    cold_start_overhead: float = 0.0
    warm_fraction: float = 0.0

    def __post_init__(self):
        if not self.unbounded:
            if self.cores_per_node < 1:
                raise ConfigurationError(f"resource {self.name}: cores_per_node must be >= 1")
            if not self.node_counts or any(n < 1 for n in self.node_counts):
                raise ConfigurationError(f"resource {self.name}: node_counts must be positive")
        if not 0.0 <= self.warm_fraction <= 1.0:
            raise ConfigurationError(f"resource {self.name}: warm_fraction must be in [0, 1]")
        if self.cold_start_overhead < 0:
            raise ConfigurationError(f"resource {self.name}: cold_start_overhead must be >= 0")

    @property
    def max_parallelism(self) -> int | None:
        """Core capacity at the largest tested node count; None when unbounded."""
        if self.unbounded:
            return None
        return max(self.node_counts) * self.cores_per_node


@dataclass(frozen=True)
class WorkflowSpec:
    """Ordered chain of components plus the resource catalog they may run on."""

    components: tuple[Component, ...]
    resources: Mapping[str, Resource] = field(default_factory=dict)

    def __post_init__(self):
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ConfigurationError("component names must be unique within a workflow")

    def component(self, name: str) -> Component:
        for comp in self.components:
            if comp.name == name:
                return comp
        raise ConfigurationError(f"unknown component {name!r}")

    def resource(self, name: str) -> Resource:
        try:
            return self.resources[name]
        except KeyError:
            raise ConfigurationError(f"unknown resource {name!r}") from None


@dataclass(frozen=True)
class TestingUnit:
    """A valid placement of one component.

    Either the whole component goes to a single resource (``placement`` holds one
    entry keyed by the component name) or every partition is assigned exactly once.
    """

    component: str
    placement: tuple[tuple[str, str], ...]  # (component-or-partition name, resource name)

    def resource_for(self, name: str) -> str:
        for target, resource in self.placement:
            if target == name:
                return resource
        raise ConfigurationError(f"testing unit for {self.component}: no placement for {name!r}")

    @property
    def is_partitioned(self) -> bool:
        return len(self.placement) > 1 or self.placement[0][0] != self.component

    def describe(self) -> str:
        return " & ".join(f"{target}->{resource}" for target, resource in self.placement)


@dataclass(frozen=True)
class Deployment:
    units: tuple[TestingUnit, ...]

    def unit_for(self, component: str) -> TestingUnit:
        for unit in self.units:
            if unit.component == component:
                return unit
        raise ConfigurationError(f"deployment has no unit for component {component!r}")

    def describe(self) -> str:
        return "; ".join(unit.describe() for unit in self.units)


@dataclass(frozen=True)
class RunConfiguration:
    """One deployment with a parallelism level per bounded component or partition."""

    deployment: Deployment
    parallelism: tuple[tuple[str, int], ...]  # (component-or-partition name, level)
    workload: WorkloadSpec | None = None

    def level_for(self, name: str) -> int | None:
        """Parallelism of a component/partition; None for unbounded placements."""
        for target, level in self.parallelism:
            if target == name:
                return level
        return None

    def describe(self) -> str:
        levels = ",".join(f"{t}={l}" for t, l in self.parallelism)
        return f"[{self.deployment.describe()}] x ({levels})" if levels else f"[{self.deployment.describe()}]"


def _unit_placements(component: Component, workflow: WorkflowSpec) -> list[TestingUnit]:
    """All testing units of one component, ordered whole-component first."""
    units: list[TestingUnit] = []
    for resource in sorted(component.compatible_resources):
        workflow.resource(resource)  # existence check
        units.append(TestingUnit(component.name, ((component.name, resource),)))
    if component.partitions:
        per_partition = []
        for part in component.partitions:
            choices = sorted(part.compatible_resources)
            for resource in choices:
                workflow.resource(resource)
            per_partition.append([(part.name, r) for r in choices])
        for combo in itertools.product(*per_partition):
            units.append(TestingUnit(component.name, tuple(combo)))
    if not units:
        raise ConfigurationError(
            f"component {component.name}: no valid placement (no compatible resources)"
        )
    return units


def enumerate_testing_units(workflow: WorkflowSpec) -> list[TestingUnit]:
    """Every valid component placement, in component order then resource order.

    Whole-component placements come first (resource lexicographic), then every
    complete partition-to-resource assignment (lexicographic in the per-partition
    resource choices). Raises ConfigurationError naming any component with zero
    valid placements.
    """
    units: list[TestingUnit] = []
    for component in workflow.components:
        units.extend(_unit_placements(component, workflow))
    return units


def enumerate_deployments(workflow: WorkflowSpec, units: Iterable[TestingUnit]) -> list[Deployment]:
    """Cartesian product of testing units across components; count = prod(per-component units)."""
    grouped: dict[str, list[TestingUnit]] = {c.name: [] for c in workflow.components}
    for unit in units:
        if unit.component not in grouped:
            raise ConfigurationError(f"testing unit for unknown component {unit.component!r}")
        grouped[unit.component].append(unit)
    for name, group in grouped.items():
        if not group:
            raise ConfigurationError(f"component {name}: no testing units to combine")
    return [
        Deployment(tuple(combo))
        for combo in itertools.product(*(grouped[c.name] for c in workflow.components))
    ]


def _capacity_check(workflow: WorkflowSpec, unit: TestingUnit, target: str, level: int) -> None:
    resource = workflow.resource(unit.resource_for(target))
    if resource.unbounded:
        raise ConfigurationError(
            f"{target}: parallelism grid given for unbounded resource {resource.name}"
        )
    cap = resource.max_parallelism
    if level > cap:
        raise CapacityError(
            f"{target}: parallelism {level} exceeds capacity {cap} of resource {resource.name}"
        )


def expand_configurations(
    deployment: Deployment,
    grid: Mapping[str, list[int]],
    workflow: WorkflowSpec,
    workload: WorkloadSpec | None = None,
) -> list[RunConfiguration]:
    """Cartesian product over per-target parallelism lists.

    ``grid`` maps a component (or partition) name to the levels to test; targets
    placed on unbounded resources must be omitted. Levels must be positive and
    within the assigned resource's node x core capacity.
    """
    targets: list[str] = []
    for unit in deployment.units:
        for target, resource_name in unit.placement:
            resource = workflow.resource(resource_name)
            if resource.unbounded:
                if target in grid:
                    raise ConfigurationError(
                        f"{target}: unbounded resource {resource_name} takes no parallelism grid"
                    )
                continue
            if target not in grid:
                raise ConfigurationError(f"{target}: missing parallelism grid")
            levels = grid[target]
            if not levels or any(l < 1 for l in levels):
                raise ConfigurationError(f"{target}: parallelism levels must be positive")
            for level in levels:
                _capacity_check(workflow, unit, target, level)
            targets.append(target)

    configs = []
    for combo in itertools.product(*(grid[t] for t in targets)):
        configs.append(RunConfiguration(deployment, tuple(zip(targets, combo)), workload))
    return configs


def select_training_configurations(
    configs: list[RunConfiguration], strategy: str = "all"
) -> tuple[list[RunConfiguration], list[RunConfiguration]]:
    """Split expanded configurations into (train, test) by profiling strategy.

    ``all`` profiles everything. ``extremes`` keeps only the configurations where
    every bounded target sits at its smallest or largest observed level (2^k picks
    for k targets with more than one level); the rest become the test set.
    """
    if strategy not in ("all", "extremes"):
        raise ConfigurationError(f"unknown selection strategy {strategy!r}")
    if strategy == "all" or not configs:
        return list(configs), []

    levels: dict[str, set[int]] = {}
    for config in configs:
        for target, level in config.parallelism:
            levels.setdefault(target, set()).add(level)
    extremes = {t: {min(vals), max(vals)} for t, vals in levels.items()}

    train, test = [], []
    for config in configs:
        at_extremes = all(level in extremes[target] for target, level in config.parallelism)
        (train if at_extremes else test).append(config)
    return train, test
