import math
import random

import pytest

from faasprof.errors import SimulationError
from faasprof.simulator import (
    JobRecord,
    ServiceLaw,
    WorkloadSpec,
    average_compute,
    makespan,
    measure_throughput,
    simulate_run,
    workflow_response_times,
)
from faasprof.workflow import (
    Component,
    Partition,
    Resource,
    WorkflowSpec,
    enumerate_deployments,
    enumerate_testing_units,
    expand_configurations,
)


def chain_workflow(n_components, cores=64, warm_fraction=0.0):
    res = Resource("pool", cores_per_node=cores, node_counts=(1,), warm_fraction=warm_fraction)
    comps = tuple(Component(f"s{i}", frozenset({"pool"})) for i in range(n_components))
    return WorkflowSpec(comps, {"pool": res})


def make_config(wf, levels, workload):
    deployment = enumerate_deployments(wf, enumerate_testing_units(wf))[0]
    grid = {name: [lvl] for name, lvl in levels.items()}
    return expand_configurations(deployment, grid, wf, workload=workload)[0]


def async_config(n_components=1, batch=1, levels=None, warm_fraction=1.0):
    wf = chain_workflow(n_components, warm_fraction=warm_fraction)
    levels = levels or {f"s{i}": 4 for i in range(n_components)}
    wl = WorkloadSpec(mode="async_batch", batch_size=batch)
    return wf, make_config(wf, levels, wl)


def wave_oracle(n_jobs, parallelism, compute):
    """Independent earliest-free-pod scheduler for a warm single-stage batch."""
    free = [0.0] * parallelism
    ends = []
    for _ in range(n_jobs):
        i = free.index(min(free))
        end = free[i] + compute
        free[i] = end
        ends.append(end)
    return max(ends)


class TestAsyncSemantics:
    def test_single_warm_job(self):
        wf, config = async_config()
        trace = simulate_run(config, {"s0": ServiceLaw(base=5.0)}, seed=1, workflow=wf)
        assert len(trace.jobs) == 1
        job = trace.jobs[0]
        assert job.wait == 0.0
        assert job.pod_creation == 0.0 and job.overhead == 0.0
        assert makespan(trace) == 5.0

    def test_wave_schedule(self):
        wf, config = async_config(batch=10)
        trace = simulate_run(config, {"s0": ServiceLaw(base=5.0)}, seed=1, workflow=wf)
        assert makespan(trace) == pytest.approx(15.0)

    def test_wave_against_bruteforce(self):
        for n in range(1, 13):
            for p in range(1, 7):
                for c in (1.0, 2.0, 5.0):
                    wf, config = async_config(batch=n, levels={"s0": p})
                    trace = simulate_run(config, {"s0": ServiceLaw(base=c)}, seed=0, workflow=wf)
                    assert makespan(trace) == pytest.approx(wave_oracle(n, p, c)), (n, p, c)

    def test_cold_start_paid_once_per_pod(self):
        wf, config = async_config(batch=4, levels={"s0": 2}, warm_fraction=0.0)
        law = ServiceLaw(base=3.0, pod_creation=1.0, overhead=0.5)
        trace = simulate_run(config, {"s0": law}, seed=1, workflow=wf)
        cold = [j for j in trace.jobs if j.pod_creation > 0]
        warm = [j for j in trace.jobs if j.pod_creation == 0]
        assert len(cold) == 2 and len(warm) == 2
        assert all(j.overhead == 0.5 for j in cold)
        assert all(j.overhead == 0.0 for j in warm)

    def test_prewarmed_fraction_on_first_component(self):
        wf = chain_workflow(2, warm_fraction=0.5)
        wl = WorkloadSpec(mode="async_batch", batch_size=4)
        config = make_config(wf, {"s0": 4, "s1": 4}, wl)
        law = ServiceLaw(base=2.0, pod_creation=1.0)
        trace = simulate_run(config, {"s0": law, "s1": law}, seed=1, workflow=wf)
        first = [j for j in trace.jobs if j.component == "s0"]
        second = [j for j in trace.jobs if j.component == "s1"]
        # floor(0.5 * 4) = 2 warm pods on the first stage only
        assert sum(1 for j in first if j.pod_creation == 0) == 2
        assert sum(1 for j in second if j.pod_creation == 0) == 0

    def test_chain_triggers_downstream(self):
        wf = chain_workflow(2)
        wl = WorkloadSpec(mode="async_batch", batch_size=6)
        config = make_config(wf, {"s0": 6, "s1": 6}, wl)
        laws = {"s0": ServiceLaw(base=1.0), "s1": ServiceLaw(base=2.0)}
        trace = simulate_run(config, laws, seed=1, workflow=wf)
        # full parallelism: every job finishes stage 1 at t=1, stage 2 at t=3
        assert makespan(trace) == pytest.approx(3.0)
        assert len(trace.jobs_of("s1")) == 6

    def test_partition_transfer_delay(self):
        parts = (
            Partition("c.1", 1, frozenset({"pool"}), transfer_delay=2.5),
            Partition("c.2", 2, frozenset({"pool"})),
        )
        res = Resource("pool", cores_per_node=8, node_counts=(1,), warm_fraction=1.0)
        wf = WorkflowSpec((Component("c", frozenset(), parts),), {"pool": res})
        wl = WorkloadSpec(mode="async_batch", batch_size=1)
        config = make_config(wf, {"c.1": 2, "c.2": 2}, wl)
        laws = {"c.1": ServiceLaw(base=1.0), "c.2": ServiceLaw(base=1.0)}
        trace = simulate_run(config, laws, seed=1, workflow=wf)
        assert makespan(trace) == pytest.approx(1.0 + 2.5 + 1.0)
        assert makespan(trace, "c.1") == pytest.approx(1.0)
        # component-level filter spans both partitions
        assert makespan(trace, "c") == pytest.approx(4.5)

    def test_unbounded_stage_runs_everything_at_once(self):
        res = Resource("faas", unbounded=True)
        wf = WorkflowSpec((Component("fn", frozenset({"faas"})),), {"faas": res})
        wl = WorkloadSpec(mode="async_batch", batch_size=50)
        deployment = enumerate_deployments(wf, enumerate_testing_units(wf))[0]
        config = expand_configurations(deployment, {}, wf, workload=wl)[0]
        trace = simulate_run(config, {"fn": ServiceLaw(base=4.0)}, seed=1, workflow=wf)
        assert makespan(trace) == pytest.approx(4.0)
        assert all(j.wait == 0.0 for j in trace.jobs)


class TestSyncSemantics:
    def _sync_config(self, rate, duration=100.0, ramp_up=0.0, cores=4, arrival="constant"):
        wf = chain_workflow(1, warm_fraction=1.0)
        wl = WorkloadSpec(
            mode="sync", arrival=arrival, rate=rate, duration=duration, ramp_up=ramp_up
        )
        return wf, make_config(wf, {"s0": cores}, wl)

    def test_unsaturated_constant_rate_has_no_queueing(self):
        wf, config = self._sync_config(rate=0.2)
        trace = simulate_run(config, {"s0": ServiceLaw(base=2.0)}, seed=1, workflow=wf)
        assert all(j.wait == 0.0 for j in trace.jobs)
        assert all(j.response == pytest.approx(2.0) for j in trace.jobs)

    def test_measured_throughput_matches_offered_rate(self):
        wf, config = self._sync_config(rate=0.2, duration=300.0, ramp_up=10.0)
        trace = simulate_run(config, {"s0": ServiceLaw(base=2.0)}, seed=1, workflow=wf)
        assert measure_throughput(trace, "s0") == pytest.approx(0.2, rel=0.05)

    def test_saturated_throughput_hits_capacity(self):
        # offered 5 req/s, capacity p/c = 4/2 = 2 req/s
        wf, config = self._sync_config(rate=5.0, duration=200.0, ramp_up=20.0)
        trace = simulate_run(config, {"s0": ServiceLaw(base=2.0)}, seed=1, workflow=wf)
        assert measure_throughput(trace, "s0") == pytest.approx(2.0, rel=0.05)

    def test_ramp_up_jobs_not_measured(self):
        wf, config = self._sync_config(rate=1.0, duration=30.0, ramp_up=10.0)
        trace = simulate_run(config, {"s0": ServiceLaw(base=0.5)}, seed=1, workflow=wf)
        assert any(not j.measured for j in trace.jobs)
        assert all(j.upload_time >= 10.0 for j in trace.jobs if j.measured)

    def test_exponential_arrivals_seeded(self):
        wf, config = self._sync_config(rate=2.0, duration=50.0, arrival="exponential")
        law = {"s0": ServiceLaw(base=0.3)}
        a = simulate_run(config, law, seed=9, workflow=wf)
        b = simulate_run(config, law, seed=9, workflow=wf)
        c = simulate_run(config, law, seed=10, workflow=wf)
        assert a.jobs == b.jobs
        assert a.jobs != c.jobs

    def test_saturation_flag_not_fatal(self):
        wf, config = self._sync_config(rate=50.0, duration=60.0)
        trace = simulate_run(
            config, {"s0": ServiceLaw(base=10.0)}, seed=1, workflow=wf, queue_cap=100
        )
        assert trace.saturated
        arrivals = len(trace.jobs_of("s0"))
        assert arrivals == len([j for j in trace.jobs if j.component == "s0"])

    def test_throughput_requires_sync_trace(self):
        wf, config = async_config(batch=3)
        trace = simulate_run(config, {"s0": ServiceLaw(base=1.0)}, seed=1, workflow=wf)
        with pytest.raises(SimulationError):
            measure_throughput(trace, "s0")


class TestTraceInvariants:
    def _random_chain(self, rng):
        n_comp = rng.randint(1, 3)
        wf = chain_workflow(n_comp)
        levels = {f"s{i}": rng.randint(1, 6) for i in range(n_comp)}
        batch = rng.randint(1, 20)
        wl = WorkloadSpec(mode="async_batch", batch_size=batch)
        config = make_config(wf, levels, wl)
        laws = {
            f"s{i}": ServiceLaw(
                base=rng.uniform(0.1, 5.0),
                pod_creation=rng.choice([0.0, rng.uniform(0, 1)]),
                overhead=rng.choice([0.0, rng.uniform(0, 0.5)]),
                noise="normal" if rng.random() < 0.5 else "none",
                sigma=0.05,
            )
            for i in range(n_comp)
        }
        return wf, config, laws, levels, batch, n_comp

    def test_conservation_and_interval_identity(self):
        rng = random.Random(42)
        for _ in range(25):
            wf, config, laws, levels, batch, n_comp = self._random_chain(rng)
            trace = simulate_run(config, laws, seed=rng.randint(0, 10**6), workflow=wf)
            for i in range(n_comp):
                assert len(trace.jobs_of(f"s{i}")) == batch
            for job in trace.jobs:
                assert job.wait >= 0 and job.pod_creation >= 0
                assert job.overhead >= 0 and job.compute >= 0
                assert job.end_time == pytest.approx(
                    job.upload_time + job.wait + job.pod_creation + job.overhead + job.compute
                )

    def test_concurrency_cap(self):
        rng = random.Random(43)
        for _ in range(15):
            wf, config, laws, levels, batch, n_comp = self._random_chain(rng)
            trace = simulate_run(config, laws, seed=rng.randint(0, 10**6), workflow=wf)
            for name, level in levels.items():
                events = []
                for job in trace.jobs_of(name):
                    events.append((job.upload_time + job.wait, 1))
                    events.append((job.end_time, -1))
                events.sort()
                running = peak = 0
                for _, delta in events:
                    running += delta
                    peak = max(peak, running)
                assert peak <= level, name

    def test_bit_determinism(self):
        rng = random.Random(44)
        for _ in range(10):
            wf, config, laws, *_ = self._random_chain(rng)
            seed = rng.randint(0, 10**6)
            a = simulate_run(config, laws, seed=seed, workflow=wf)
            b = simulate_run(config, laws, seed=seed, workflow=wf)
            assert a.jobs == b.jobs

    def test_pipeline_dominance(self):
        # full-workflow makespan never exceeds the sum of isolated per-component makespans
        rng = random.Random(45)
        violations = 0
        for _ in range(50):
            n_comp = rng.randint(2, 3)
            wf = chain_workflow(n_comp)
            levels = {f"s{i}": rng.randint(1, 6) for i in range(n_comp)}
            batch = rng.randint(1, 20)
            wl = WorkloadSpec(mode="async_batch", batch_size=batch)
            config = make_config(wf, levels, wl)
            laws = {f"s{i}": ServiceLaw(base=rng.uniform(0.2, 8.0)) for i in range(n_comp)}
            full = makespan(simulate_run(config, laws, seed=1, workflow=wf))
            isolated = sum(
                makespan(simulate_run(config, laws, seed=1, workflow=wf, component=f"s{i}"))
                for i in range(n_comp)
            )
            if full > isolated + 1e-9:
                violations += 1
        assert violations == 0

    def test_makespan_monotone_in_parallelism(self):
        rng = random.Random(46)
        for _ in range(10):
            batch = rng.randint(2, 20)
            compute = rng.uniform(0.5, 5.0)
            spans = []
            for p in (1, 2, 4, 8):
                wf, config = async_config(batch=batch, levels={"s0": p})
                trace = simulate_run(config, {"s0": ServiceLaw(base=compute)}, seed=1, workflow=wf)
                spans.append(makespan(trace))
            assert spans == sorted(spans, reverse=True)


class TestLawsAndRecords:
    def test_noise_clamped_at_zero(self):
        law = ServiceLaw(base=0.01, noise="normal", sigma=50.0)
        wf, config = async_config(batch=200)
        trace = simulate_run(config, {"s0": law}, seed=3, workflow=wf)
        assert all(j.compute >= 0.0 for j in trace.jobs)
        assert any(j.compute == 0.0 for j in trace.jobs)  # sigma huge: clamping must trigger

    def test_inv_cores_scale(self):
        law = ServiceLaw(base=20.0, per_core_coefficient=300.0, scale="inv_cores")
        assert law.mean_compute(cores=4, batch_size=None) == pytest.approx(95.0)

    def test_batch_term(self):
        law = ServiceLaw(base=1.0, batch_coefficient=0.5)
        assert law.mean_compute(cores=2, batch_size=10) == pytest.approx(6.0)

    def test_record_identity(self):
        job = JobRecord(0, "s0", upload_time=1.0, wait=2.0, pod_creation=0.5, overhead=0.25, compute=3.0)
        assert job.start_time == pytest.approx(3.75)
        assert job.end_time == pytest.approx(6.75)

    def test_workflow_response_times(self):
        wf = chain_workflow(2)
        wl = WorkloadSpec(mode="async_batch", batch_size=3)
        config = make_config(wf, {"s0": 3, "s1": 3}, wl)
        laws = {"s0": ServiceLaw(base=1.0), "s1": ServiceLaw(base=2.0)}
        trace = simulate_run(config, laws, seed=1, workflow=wf)
        times = workflow_response_times(trace)
        assert len(times) == 3
        assert all(t == pytest.approx(3.0) for t in times)

    def test_average_compute(self):
        wf, config = async_config(batch=5)
        trace = simulate_run(config, {"s0": ServiceLaw(base=2.0)}, seed=1, workflow=wf)
        assert average_compute(trace, "s0") == pytest.approx(2.0)

    def test_unknown_component_errors(self):
        wf, config = async_config()
        trace = simulate_run(config, {"s0": ServiceLaw(base=1.0)}, seed=1, workflow=wf)
        with pytest.raises(SimulationError):
            makespan(trace, "nope")

    def test_missing_law_errors(self):
        wf, config = async_config()
        with pytest.raises(SimulationError, match="law"):
            simulate_run(config, {}, seed=1, workflow=wf)

    def test_workload_validation(self):
        with pytest.raises(Exception):
            WorkloadSpec(mode="sync", rate=0.0, duration=10.0)
        with pytest.raises(Exception):
            WorkloadSpec(mode="sync", rate=1.0, duration=10.0, ramp_up=10.0)
        with pytest.raises(Exception):
            WorkloadSpec(mode="async_batch", batch_size=0)
