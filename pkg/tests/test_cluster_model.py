import math

import numpy as np
import pytest

from backend_cluster_model import (
    FAILURE_SAMPLERS,
    FailureKind,
    FailureModel,
    Health,
    ServerStatus,
    build_cluster,
    next_regeneration,
    regenerate_bad_set,
    sample_segment_failures,
    sample_time_to_failure,
    segment_hazard,
)
from backend_errors import ConfigError, InvariantViolation
from backend_param_config import SimParams


def test_build_cluster_pools_and_bad_fraction(rng):
    params = SimParams(job_size=8, working_pool_size=100, spare_pool_size=20, systematic_failure_fraction=0.15)
    cluster = build_cluster(params, rng("topology"))
    servers, pools = cluster
    assert len(servers) == 120
    assert list(pools.working) == list(range(100))
    assert list(pools.spare) == list(range(100, 120))
    assert cluster.bad_count() == 18
    assert sum(s.health is Health.BAD for s in servers) == 18
    assert all(s.status is ServerStatus.IDLE_WORKING for s in servers[:100])
    cluster.check_conservation()


def test_build_cluster_needs_job_size_in_working_pool(rng):
    params = SimParams(job_size=8, working_pool_size=4, spare_pool_size=20)
    with pytest.raises(ConfigError):
        build_cluster(params, rng("topology"))


def test_zero_fraction_means_all_good(rng):
    cluster = build_cluster(SimParams(job_size=4, working_pool_size=10, spare_pool_size=0,
                                      systematic_failure_fraction=0.0), rng("t"))
    assert cluster.bad_count() == 0


def test_only_computing_servers_can_fail(rng):
    params = SimParams(job_size=2, working_pool_size=4, spare_pool_size=0)
    cluster = build_cluster(params, rng("t"))
    with pytest.raises(InvariantViolation):
        sample_time_to_failure(cluster.servers[0], FailureModel.from_params(params), rng("f"))


def test_good_servers_only_fail_randomly(rng):
    params = SimParams(job_size=2, working_pool_size=4, spare_pool_size=0, systematic_failure_fraction=0.0)
    cluster = build_cluster(params, rng("t"))
    server = cluster.servers[0]
    server.move_to(ServerStatus.COMPUTING)
    model = FailureModel.from_params(params)
    stream = rng("f")
    assert all(sample_time_to_failure(server, model, stream)[1] is FailureKind.RANDOM for _ in range(500))


def test_bad_server_systematic_share(rng):
    model = FailureModel(random_rate=1.0, systematic_rate=4.0, systematic_fraction=1.0)
    params = SimParams(job_size=1, working_pool_size=1, spare_pool_size=0, systematic_failure_fraction=1.0)
    cluster = build_cluster(params, rng("t"))
    server = cluster.servers[0]
    server.move_to(ServerStatus.COMPUTING)
    stream = rng("f")
    kinds = [sample_time_to_failure(server, model, stream)[1] for _ in range(20000)]
    share = sum(k is FailureKind.SYSTEMATIC for k in kinds) / len(kinds)
    assert share == pytest.approx(0.8, abs=0.015)


def test_segment_failures_systematic_only_on_bad(rng):
    params = SimParams(job_size=50, working_pool_size=100, spare_pool_size=0, systematic_failure_fraction=0.3)
    cluster = build_cluster(params, rng("t"))
    model = FailureModel.from_params(params)
    ids = np.arange(100)
    for _ in range(20):
        delays, systematic = sample_segment_failures(cluster, ids, model, rng("f"), FAILURE_SAMPLERS["exponential"])
        assert (delays > 0).all()
        assert not systematic[~cluster.bad_mask[ids]].any()


def test_segment_hazard_counts_bad_servers(rng):
    params = SimParams(job_size=10, working_pool_size=10, spare_pool_size=0, systematic_failure_fraction=0.2)
    cluster = build_cluster(params, rng("t"))
    model = FailureModel.from_params(params)
    hazard = segment_hazard(cluster, np.arange(10), model)
    assert hazard == pytest.approx(10 * model.random_rate + 2 * model.systematic_rate)


def test_regeneration_keeps_bad_count_and_skips_removed(rng):
    params = SimParams(job_size=10, working_pool_size=100, spare_pool_size=0, systematic_failure_fraction=0.1)
    cluster = build_cluster(params, rng("t"))
    removed = cluster.servers[0]
    del cluster.pools.working[0]
    removed.move_to(ServerStatus.REMOVED)
    cluster.pools.removed_count = 1
    cluster.set_health(0, Health.GOOD)
    before = cluster.bad_mask.copy()

    n_bad = regenerate_bad_set(cluster, FailureModel.from_params(params), rng("regen"))
    assert n_bad == round(0.1 * 99)
    assert cluster.bad_count() == n_bad
    assert removed.health is Health.GOOD
    assert not np.array_equal(before, cluster.bad_mask)
    cluster.check_conservation()


def test_next_regeneration():
    assert next_regeneration(5.0, FailureModel(1.0, 1.0, 0.1)) == math.inf
    assert next_regeneration(5.0, FailureModel(1.0, 1.0, 0.1, regeneration_period=100.0)) == 105.0


def test_conservation_detects_pool_status_mismatch(rng):
    params = SimParams(job_size=2, working_pool_size=4, spare_pool_size=2)
    cluster = build_cluster(params, rng("t"))
    cluster.servers[1].status = ServerStatus.COMPUTING
    with pytest.raises(InvariantViolation):
        cluster.check_conservation()


def test_removed_server_cannot_move():
    from backend_cluster_model import Server

    s = Server(3, status=ServerStatus.REMOVED)
    with pytest.raises(InvariantViolation):
        s.move_to(ServerStatus.IDLE_WORKING)


def test_failure_model_validation():
    with pytest.raises(ConfigError):
        FailureModel(random_rate=-1.0, systematic_rate=0.0, systematic_fraction=0.1)
    with pytest.raises(ConfigError):
        FailureModel(random_rate=1.0, systematic_rate=0.0, systematic_fraction=1.5)
