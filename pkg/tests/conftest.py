# tests/conftest.py
import pytest

from backend_param_config import SimParams
from backend_sim_kernel import spawn_rng_stream


@pytest.fixture
def small_params() -> SimParams:
    """Desk-scale cluster: 16-server job for 2 days, failures ~100x more frequent than default."""
    return SimParams(
        random_failure_rate=1.0 / (24 * 60),
        job_size=16,
        job_length=2.0 * 24 * 60,
        warm_standbys=4,
        working_pool_size=24,
        spare_pool_size=8,
        auto_repair_time=60.0,
        manual_repair_time=240.0,
        replications=3,
    ).validate()


@pytest.fixture
def rng():
    """Factory for labelled streams: rng("failure"), rng("repair", replication=3)."""

    def make(label: str = "test", replication: int = 0, seed: int = 12345):
        return spawn_rng_stream(seed, replication, label)

    return make


@pytest.fixture
def tiny_params() -> SimParams:
    """Fast enough to sweep inside unit tests."""
    return SimParams(
        random_failure_rate=1.0 / (24 * 60),
        job_size=8,
        job_length=24 * 60.0,
        warm_standbys=2,
        working_pool_size=12,
        spare_pool_size=4,
        auto_repair_time=60.0,
        manual_repair_time=240.0,
        replications=2,
    ).validate()
