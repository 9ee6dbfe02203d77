"""Desk-scale statistical runs. Minutes each; deselect with -m "not slow"."""

import math
import os

import numpy as np
import pytest

from backend_experiments import SweepSpec, run_sweep
from backend_job_orchestration import run_simulation
from backend_param_config import MINUTES_PER_DAY, SimParams

pytestmark = pytest.mark.slow

WORKERS = min(4, os.cpu_count() or 1)
JOB_SIZE = 256
STANDBYS = 16
SURPLUS = (0, 32, 64)


@pytest.fixture(scope="module")
def desk_params() -> SimParams:
    return SimParams(
        random_failure_rate=20 * 0.01 / MINUTES_PER_DAY,
        job_size=JOB_SIZE,
        job_length=10.0 * MINUTES_PER_DAY,
        warm_standbys=STANDBYS,
        working_pool_size=JOB_SIZE + STANDBYS,
        spare_pool_size=200,
        replications=100,
    ).validate()


def _means(result):
    table = {}
    for cell in result.cells:
        stats = cell.stats["total_time"]
        table[cell.values] = (stats.mean, stats.stddev / math.sqrt(stats.count))
    return table


def _not_below(hi, lo):
    """hi >= lo up to two combined standard errors."""
    return hi[0] >= lo[0] - 2 * math.hypot(hi[1], lo[1])


def _pools():
    return [JOB_SIZE + STANDBYS + s for s in SURPLUS]


def test_training_time_grows_with_recovery_and_shrinks_with_pool(desk_params):
    spec = SweepSpec.create("recovery", "recovery_time", [10, 20, 30], ("working_pool_size", _pools()),
                            replications=100, base_seed=1)
    table = _means(run_sweep(spec, desk_params, workers=WORKERS))
    for pool in _pools():
        assert _not_below(table[(20.0, pool)], table[(10.0, pool)])
        assert _not_below(table[(30.0, pool)], table[(20.0, pool)])
    for r in (10.0, 20.0, 30.0):
        p0, p32, p64 = _pools()
        assert _not_below(table[(r, p0)], table[(r, p32)])
        assert _not_below(table[(r, p32)], table[(r, p64)])


def test_training_time_grows_with_waiting_time_most_at_zero_surplus(desk_params):
    spec = SweepSpec.create("waiting", "waiting_time", [10, 20, 30], ("working_pool_size", _pools()),
                            replications=100, base_seed=2)
    table = _means(run_sweep(spec, desk_params, workers=WORKERS))
    for pool in _pools():
        assert _not_below(table[(20.0, pool)], table[(10.0, pool)])
        assert _not_below(table[(30.0, pool)], table[(20.0, pool)])

    tight, roomy = _pools()[0], _pools()[-1]
    effect_tight = table[(30.0, tight)][0] - table[(10.0, tight)][0]
    effect_roomy = table[(30.0, roomy)][0] - table[(10.0, roomy)][0]
    noise = 2 * math.sqrt(sum(table[(w, p)][1] ** 2 for w in (10.0, 30.0) for p in (tight, roomy)))
    assert effect_tight >= effect_roomy - noise


def test_failure_count_law_with_mixed_population():
    params = SimParams(
        random_failure_rate=0.2 / MINUTES_PER_DAY,
        systematic_failure_fraction=0.15,
        job_size=64,
        job_length=5.0 * MINUTES_PER_DAY,
        warm_standbys=64,
        working_pool_size=160,
        spare_pool_size=64,
    ).validate()
    runs = [run_simulation(params, seed=99, replication=r) for r in range(200)]
    failures = np.array([r.failures_total for r in runs], dtype=float)
    exposure = np.array([r.hazard_exposure for r in runs])
    se = failures.std(ddof=1) / math.sqrt(len(failures))
    assert abs(failures.mean() - exposure.mean()) < 3 * se


def test_repair_proportions_over_many_failures(desk_params):
    params = desk_params.override(job_length=40.0 * MINUTES_PER_DAY, spare_pool_size=400)
    auto = manual = 0
    for rep in range(120):
        result = run_simulation(params, seed=5, replication=rep)
        auto += result.auto_repairs
        manual += result.manual_repairs
    assert auto >= 100_000
    assert manual / auto == pytest.approx(1 - params.auto_repair_probability, abs=0.01)
