import math
from collections import deque

import numpy as np
import pytest

from backend_cluster_model import Health, PoolState, Server, ServerStatus
from backend_errors import InvariantViolation, JobStarvedError
from backend_job_orchestration import (
    ClusterSimulation,
    JobPhase,
    JobSpec,
    JobState,
    Placement,
    acquire_from_spare,
    run_simulation,
    select_servers,
    swap_warm_standby,
)
from backend_param_config import SimParams
from backend_repair_pipeline import Destination


def _no_failures(**changes) -> SimParams:
    base = dict(random_failure_rate=0.0, systematic_failure_fraction=0.0, job_size=8, working_pool_size=12,
                spare_pool_size=4, warm_standbys=2, job_length=1000.0)
    base.update(changes)
    return SimParams(**base).validate()


def test_no_failures_total_is_setup_plus_length():
    params = SimParams(random_failure_rate=0.0, systematic_failure_fraction=0.0).validate()
    result = run_simulation(params, seed=1)
    assert result.total_time == params.host_selection_time + params.recovery_time + params.job_length
    assert result.failures_total == 0
    assert result.preemptions == 0
    assert result.hazard_exposure == 0.0
    assert result.avg_run_duration == params.job_length


def test_spare_shortfall_adds_waiting_time():
    params = _no_failures(working_pool_size=8, spare_pool_size=4)
    result = run_simulation(params, seed=3)
    assert result.total_time == pytest.approx(params.waiting_time + params.host_selection_time
                                              + params.recovery_time + params.job_length)
    assert result.preemptions == 2
    assert result.spare_acquisitions == 1


def test_preemption_cost_is_accounted_not_timed():
    params = _no_failures(working_pool_size=8, spare_pool_size=4, preemption_cost_per_server=7.5)
    result = run_simulation(params, seed=3)
    assert result.preemption_cost == 15.0
    assert result.total_time == pytest.approx(20.0 + 3.0 + 20.0 + 1000.0)


def test_ample_standbys_cost_one_recovery_per_failure():
    params = SimParams(
        random_failure_rate=1.0 / 2000, systematic_failure_fraction=0.0, job_size=4, warm_standbys=30,
        working_pool_size=40, spare_pool_size=0, job_length=5000.0, auto_repair_time=30.0,
        manual_repair_time=60.0,
    ).validate()
    for rep in range(5):
        result = run_simulation(params, seed=11, replication=rep)
        f = result.failures_total
        assert f > 0
        assert result.standby_swaps == f
        assert result.host_selections == 1
        assert result.compute_segments == f + 1
        expected = params.host_selection_time + params.recovery_time * (f + 1) + params.job_length
        assert result.total_time == pytest.approx(expected, rel=1e-9)


def test_single_server_job_mean_time():
    """One server, unlimited standbys: E[total] = L + r * (1 + lambda * L)."""
    params = SimParams(
        random_failure_rate=0.001, systematic_failure_fraction=0.0, job_size=1, warm_standbys=50,
        working_pool_size=60, spare_pool_size=0, recovery_time=20.0, host_selection_time=0.0,
        job_length=1e4,
    ).validate()
    totals = np.array([run_simulation(params, seed=2024, replication=r).total_time for r in range(500)])
    se = totals.std(ddof=1) / math.sqrt(len(totals))
    assert abs(totals.mean() - 10220.0) < 3 * se


def test_failure_count_matches_integrated_hazard(small_params):
    params = small_params.override(systematic_failure_fraction=0.25)
    diffs = []
    for rep in range(200):
        result = run_simulation(params, seed=77, replication=rep)
        diffs.append(result.failures_total - result.hazard_exposure)
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / math.sqrt(len(diffs))
    assert abs(diffs.mean()) < 4 * se


def test_same_seed_same_trace(small_params):
    a, b = [], []
    ra = run_simulation(small_params, seed=5, replication=2, trace=a)
    rb = run_simulation(small_params, seed=5, replication=2, trace=b)
    assert a == b
    assert ra == rb
    c = []
    run_simulation(small_params, seed=5, replication=3, trace=c)
    assert c != a


def test_trace_is_time_ordered(small_params):
    trace = []
    result = run_simulation(small_params, seed=9, trace=trace)
    times = [t for t, _, _ in trace]
    assert times == sorted(times)
    assert trace[-1][1] == "JobComplete"
    assert trace[-1][0] == result.total_time


def test_failed_server_is_sent_to_repair(small_params):
    result = run_simulation(small_params, seed=4)
    assert result.failures_total > 0
    assert result.auto_repairs == result.failures_total
    assert result.failures_random + result.failures_systematic == result.failures_total
    assert result.manual_repairs <= result.auto_repairs


def test_full_diagnosis_uncertainty_always_blames_another(small_params):
    params = small_params.override(diagnosis_uncertainty=1.0, debug_checks=True)
    result = run_simulation(params, seed=8)
    assert result.failures_total > 0
    assert result.misdiagnoses == result.failures_total


def test_removal_can_starve_the_job():
    params = SimParams(
        random_failure_rate=1.0 / 60, job_size=8, working_pool_size=8, spare_pool_size=0, warm_standbys=0,
        removal_threshold=1, removal_window=1e9, job_length=1e6,
    ).validate()
    with pytest.raises(JobStarvedError):
        run_simulation(params, seed=1)


def test_removal_with_spares_finishes_and_counts(small_params):
    params = small_params.override(removal_threshold=1, removal_window=1e9, spare_pool_size=40,
                                    debug_checks=True)
    result = run_simulation(params, seed=21)
    assert result.removed_servers > 0
    assert result.auto_repairs + result.removed_servers == result.failures_total


def test_every_failure_resumes_by_swap_or_restart(small_params):
    params = small_params.override(warm_standbys=0, debug_checks=True)
    result = run_simulation(params, seed=6)
    assert result.failures_total > 0
    assert result.host_selections > 1
    assert result.host_selections + result.standby_swaps == result.failures_total + 1


def test_regeneration_ticks_and_invariants_hold(small_params):
    params = small_params.override(regeneration_period=360.0, debug_checks=True)
    trace = []
    run_simulation(params, seed=3, trace=trace)
    ticks = [t for t, kind, _ in trace if kind == "RegenerationTick"]
    assert ticks[:3] == [360.0, 720.0, 1080.0]


@pytest.mark.parametrize("policy", ["first_fit", "random", "least_failures"])
def test_host_selection_policies_run(small_params, policy):
    result = run_simulation(small_params.override(host_selection_policy=policy, debug_checks=True), seed=10)
    assert result.total_time > small_params.job_length


def test_random_configurations_keep_invariants():
    gen = np.random.default_rng(31337)
    policies = ["first_fit", "random", "least_failures"]
    for case in range(50):
        job_size = int(gen.integers(1, 13))
        standbys = int(gen.integers(0, 5))
        working = job_size + int(gen.integers(0, standbys + 5))
        params = SimParams(
            random_failure_rate=float(gen.uniform(1 / 2000, 1 / 200)),
            systematic_failure_fraction=float(gen.uniform(0.0, 0.5)),
            systematic_rate_multiplier=float(gen.uniform(0.0, 8.0)),
            job_size=job_size,
            warm_standbys=standbys,
            working_pool_size=working,
            spare_pool_size=int(gen.integers(0, 7)),
            job_length=float(gen.uniform(500.0, 5000.0)),
            auto_repair_time=float(gen.uniform(10.0, 200.0)),
            manual_repair_time=float(gen.uniform(50.0, 1000.0)),
            diagnosis_uncertainty=float(gen.uniform(0.0, 0.3)),
            host_selection_policy=policies[case % 3],
            regeneration_period=float(gen.uniform(200.0, 2000.0)) if case % 4 == 0 else None,
            debug_checks=True,
        ).validate()
        for rep in range(10):
            result = run_simulation(params, seed=case, replication=rep)
            assert result.total_time >= params.job_length + params.host_selection_time + params.recovery_time
            assert result.compute_segments == result.failures_total + 1


def test_select_servers_policies(rng):
    servers = [Server(i) for i in range(6)]
    servers[0].failure_log = [(1.0, None)] * 3
    servers[1].failure_log = [(1.0, None)]
    pool = {i: None for i in range(6)}
    assert select_servers(pool, 3, servers, "first_fit", rng("p")) == [0, 1, 2]
    assert select_servers(pool, 3, servers, "least_failures", rng("p")) == [2, 3, 4]
    picked = select_servers(pool, 4, servers, "random", rng("p"))
    assert len(set(picked)) == 4 and set(picked) <= set(pool)
    assert select_servers(pool, 0, servers, "first_fit", rng("p")) == []


def _job(computing, standbys):
    spec = JobSpec(job_size=len(computing), job_length=100.0, warm_standbys=len(standbys), recovery_time=1.0,
                   host_selection_time=1.0, waiting_time=1.0)
    job = JobState(0, spec)
    job.computing_servers = dict.fromkeys(computing)
    job.standby_servers = deque(standbys)
    return job


def test_swap_takes_first_standby():
    job = swap_warm_standby(_job([1, 2, 3], [7, 8]), 2)
    assert list(job.computing_servers) == [1, 3, 7]
    assert list(job.standby_servers) == [8]
    assert job.standby_swaps == 1


def test_swap_without_standbys_is_a_bug():
    with pytest.raises(InvariantViolation):
        swap_warm_standby(_job([1, 2], []), 1)
    with pytest.raises(InvariantViolation):
        swap_warm_standby(_job([1, 2], [5]), 9)


def test_acquire_from_spare_takes_what_is_there():
    pools = PoolState(spare={10: None, 11: None, 12: None})
    spec = JobSpec(job_size=4, job_length=1.0, warm_standbys=0, recovery_time=0.0, host_selection_time=0.0,
                   waiting_time=20.0, preemption_cost_per_server=2.0)
    delay, ids, cost = acquire_from_spare(pools, 5, spec)
    assert (delay, ids, cost) == (20.0, [10, 11, 12], 6.0)
    assert list(pools.spare) == [10, 11, 12]
    with pytest.raises(InvariantViolation):
        acquire_from_spare(PoolState(), 1, spec)


def test_repaired_server_placement():
    sim = ClusterSimulation(_no_failures(working_pool_size=10, spare_pool_size=2), seed=0)
    server = sim.servers[9]
    del sim.pools.working[9]
    server.move_to(ServerStatus.AUTO_REPAIR)
    assert sim.reintegrate_repaired(server, Destination.RETURN_TO_JOB) is Placement.JOB_STANDBY
    assert sim.job.standby_servers[-1] == 9

    other = sim.servers[10]
    del sim.pools.spare[10]
    other.move_to(ServerStatus.MANUAL_REPAIR)
    assert sim.reintegrate_repaired(other, Destination.RETURN_TO_WORKING) is Placement.WORKING_POOL
    assert 10 in sim.pools.working


def test_repaired_server_overflows_to_spare_when_working_is_full():
    sim = ClusterSimulation(_no_failures(working_pool_size=10, spare_pool_size=2), seed=0)
    server = sim.servers[11]
    del sim.pools.spare[11]
    server.move_to(ServerStatus.AUTO_REPAIR)
    assert sim.reintegrate_repaired(server, Destination.RETURN_TO_WORKING) is Placement.SPARE_POOL
    assert server.status is ServerStatus.IDLE_SPARE
    assert server.health is Health.GOOD


def test_job_stalls_until_a_repair_returns():
    params = SimParams(
        random_failure_rate=1.0 / 200, job_size=4, working_pool_size=4, spare_pool_size=0, warm_standbys=0,
        job_length=1440.0, auto_repair_time=60.0, manual_repair_time=240.0, debug_checks=True,
    ).validate()
    for rep in range(20):
        result = run_simulation(params, seed=12, replication=rep)
        assert result.failures_total > 0
        assert result.stalls == result.failures_total
        assert result.host_selections == result.failures_total + 1
        assert result.preemptions == 0


def _step_until_computing(sim):
    while sim.job.phase is not JobPhase.COMPUTING:
        event = sim.kernel.next_event()
        sim._handlers[event.kind](event)


def test_misdiagnosed_standby_goes_to_repair_without_a_swap():
    params = _no_failures(job_size=1, warm_standbys=3, working_pool_size=4, spare_pool_size=0,
                          diagnosis_uncertainty=1.0)
    sim = ClusterSimulation(params, seed=2)
    sim.start_job()
    _step_until_computing(sim)
    (failed,) = sim.job.computing_servers
    standbys = list(sim.job.standby_servers)
    assert len(standbys) == 3

    sim.handle_failure(failed)

    assert list(sim.job.computing_servers) == [failed]
    assert len(sim.job.standby_servers) == 2
    blamed = (set(standbys) - set(sim.job.standby_servers)).pop()
    assert sim.servers[blamed].status is ServerStatus.AUTO_REPAIR
    assert sim.servers[failed].status is ServerStatus.COMPUTING
    assert sim.job.standby_swaps == 0
    assert sim.misdiagnoses == 1
    assert sim.auto_repairs == 1
    assert sim.job.phase is JobPhase.RECOVERING
    sim.check_invariants()


def test_misdiagnosis_onto_standbys_never_swaps():
    params = SimParams(
        random_failure_rate=1.0 / 500, job_size=1, warm_standbys=3, working_pool_size=4, spare_pool_size=0,
        job_length=5000.0, auto_repair_time=60.0, manual_repair_time=240.0, diagnosis_uncertainty=1.0,
        debug_checks=True,
    ).validate()
    result = run_simulation(params, seed=17)
    assert result.failures_total > 0
    assert result.standby_swaps == 0
