# backend_cluster_model.py
"""
Servers, their health classes and failure processes, and the working/spare pools.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

import numpy as np

from backend_errors import ConfigError, InvariantViolation
from backend_param_config import SimParams
from backend_sim_kernel import RngStream, SimTime

logger = logging.getLogger(__name__)


class Health(Enum):
    GOOD = "Good"
    BAD = "Bad"


class ServerStatus(Enum):
    IDLE_WORKING = "IdleInWorkingPool"
    IDLE_SPARE = "IdleInSparePool"
    COMPUTING = "AssignedComputing"
    STANDBY = "AssignedStandby"
    AUTO_REPAIR = "InAutoRepair"
    MANUAL_REPAIR = "InManualRepair"
    REMOVED = "Removed"


class FailureKind(Enum):
    RANDOM = "Random"
    SYSTEMATIC = "Systematic"


ASSIGNED = (ServerStatus.COMPUTING, ServerStatus.STANDBY)
IN_REPAIR = (ServerStatus.AUTO_REPAIR, ServerStatus.MANUAL_REPAIR)


@dataclass
class Server:
    id: int
    health: Health = Health.GOOD
    status: ServerStatus = ServerStatus.IDLE_WORKING
    origin_job: Optional[int] = None
    failure_log: list[tuple[SimTime, FailureKind]] = field(default_factory=list)
    # times of failures attributed to this server by diagnosis (removal score)
    score_log: list[SimTime] = field(default_factory=list)

    def move_to(self, status: ServerStatus) -> None:
        if self.status is ServerStatus.REMOVED:
            raise InvariantViolation(f"server {self.id} is Removed and cannot become {status.value}")
        self.status = status


@dataclass
class PoolState:
    working: dict[int, None] = field(default_factory=dict)  # insertion-ordered sets
    spare: dict[int, None] = field(default_factory=dict)
    working_capacity: int = 0
    spare_capacity: int = 0
    removed_count: int = 0


@dataclass(frozen=True)
class FailureModel:
    random_rate: float
    systematic_rate: float
    systematic_fraction: float
    regeneration_period: Optional[float] = None

    def __post_init__(self):
        if self.random_rate < 0 or self.systematic_rate < 0:
            raise ConfigError("failure rates must be >= 0")
        if not 0.0 <= self.systematic_fraction <= 1.0:
            raise ConfigError("systematic_fraction must be in [0, 1]")

    @classmethod
    def from_params(cls, params: SimParams) -> "FailureModel":
        return cls(
            random_rate=params.random_failure_rate,
            systematic_rate=params.systematic_failure_rate,
            systematic_fraction=params.systematic_failure_fraction,
            regeneration_period=params.regeneration_period,
        )

    def hazard(self, health: Health) -> float:
        if health is Health.BAD:
            return self.random_rate + self.systematic_rate
        return self.random_rate


class FailureSampler(Protocol):
    """Draws times-to-failure for an array of per-server rates."""

    def sample(self, rates: np.ndarray, rng: RngStream) -> np.ndarray: ...


class ExponentialSampler:
    def sample(self, rates: np.ndarray, rng: RngStream) -> np.ndarray:
        return rng.exponentials(rates)


FAILURE_SAMPLERS: dict[str, FailureSampler] = {
    "exponential": ExponentialSampler(),
}


@dataclass(eq=False)
class Cluster:
    """All servers of one run, the pools, and a health mask kept in step with Server.health."""

    servers: list[Server]
    pools: PoolState
    bad_mask: np.ndarray

    def __iter__(self):
        # allows `servers, pools = build_cluster(...)`
        return iter((self.servers, self.pools))

    @property
    def total(self) -> int:
        return len(self.servers)

    def set_health(self, server_id: int, health: Health) -> None:
        self.servers[server_id].health = health
        self.bad_mask[server_id] = health is Health.BAD

    def bad_count(self) -> int:
        return int(self.bad_mask.sum())

    def status_counts(self) -> dict[ServerStatus, int]:
        counts = {s: 0 for s in ServerStatus}
        for srv in self.servers:
            counts[srv.status] += 1
        return counts

    def check_conservation(self) -> None:
        """working + spare + assigned + in repair + removed == total, and pools agree with statuses."""
        pools = self.pools
        if pools.working.keys() & pools.spare.keys():
            raise InvariantViolation("a server is in both the working and the spare pool")
        counts = self.status_counts()
        assigned = counts[ServerStatus.COMPUTING] + counts[ServerStatus.STANDBY]
        repairing = counts[ServerStatus.AUTO_REPAIR] + counts[ServerStatus.MANUAL_REPAIR]
        if counts[ServerStatus.REMOVED] != pools.removed_count:
            raise InvariantViolation(
                f"removed_count={pools.removed_count} but {counts[ServerStatus.REMOVED]} servers are Removed"
            )
        if counts[ServerStatus.IDLE_WORKING] != len(pools.working) or counts[ServerStatus.IDLE_SPARE] != len(pools.spare):
            raise InvariantViolation("pool membership disagrees with server statuses")
        total = len(pools.working) + len(pools.spare) + assigned + repairing + pools.removed_count
        if total != self.total:
            raise InvariantViolation(f"server conservation broken: {total} accounted for, {self.total} exist")


def _mark_bad_subset(cluster: Cluster, candidates: list[int], fraction: float, rng: RngStream) -> int:
    n_bad = int(round(fraction * len(candidates)))
    for sid in rng.sample(candidates, n_bad):
        cluster.set_health(sid, Health.BAD)
    return n_bad


def build_cluster(params: SimParams, rng: RngStream) -> Cluster:
    """
    1) Create working_pool_size + spare_pool_size idle servers (working pool first).
    2) Mark round(fraction * total) of them Bad, uniformly across both pools.
    No failure events are scheduled here.
    """
    working_capacity = params.working_pool_size
    spare_capacity = params.spare_pool_size
    if working_capacity < params.job_size:
        raise ConfigError(
            f"working_pool_size={working_capacity} < job_size={params.job_size}: the job can never start"
        )
    total = working_capacity + spare_capacity
    servers = []
    pools = PoolState(working_capacity=working_capacity, spare_capacity=spare_capacity)
    for sid in range(total):
        if sid < working_capacity:
            servers.append(Server(sid, status=ServerStatus.IDLE_WORKING))
            pools.working[sid] = None
        else:
            servers.append(Server(sid, status=ServerStatus.IDLE_SPARE))
            pools.spare[sid] = None

    cluster = Cluster(servers, pools, np.zeros(total, dtype=bool))
    n_bad = _mark_bad_subset(cluster, list(range(total)), params.systematic_failure_fraction, rng)
    logger.debug("built cluster: %d working, %d spare, %d bad", working_capacity, spare_capacity, n_bad)
    return cluster


def sample_time_to_failure(
    server: Server,
    model: FailureModel,
    rng: RngStream,
) -> tuple[float, FailureKind]:
    """
    Good: Exponential(random_rate), Random.
    Bad: competing Exponential(random_rate) and Exponential(systematic_rate); the earlier wins.
    """
    if server.status is not ServerStatus.COMPUTING:
        raise InvariantViolation(f"server {server.id} is {server.status.value}; only computing servers fail")
    delay = rng.exponential(model.random_rate)
    if server.health is Health.GOOD:
        return delay, FailureKind.RANDOM
    systematic_delay = rng.exponential(model.systematic_rate)
    if systematic_delay < delay:
        return systematic_delay, FailureKind.SYSTEMATIC
    return delay, FailureKind.RANDOM


def sample_segment_failures(
    cluster: Cluster,
    computing_ids: np.ndarray,
    model: FailureModel,
    rng: RngStream,
    sampler: FailureSampler,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized sample_time_to_failure over the whole computing set.
    Returns (delays, systematic_flags). Always draws two numbers per server
    so the stream position does not depend on the Bad set.
    """
    n = len(computing_ids)
    bad = cluster.bad_mask[computing_ids]
    random_delays = sampler.sample(np.full(n, model.random_rate), rng)
    systematic_delays = sampler.sample(np.where(bad, model.systematic_rate, 0.0), rng)
    systematic = systematic_delays < random_delays
    return np.where(systematic, systematic_delays, random_delays), systematic


def segment_hazard(cluster: Cluster, computing_ids: np.ndarray, model: FailureModel) -> float:
    n_bad = int(cluster.bad_mask[computing_ids].sum())
    return len(computing_ids) * model.random_rate + n_bad * model.systematic_rate


def regenerate_bad_set(cluster: Cluster, model: FailureModel, rng: RngStream) -> int:
    """
    Re-draw health labels: every live server becomes Good, then
    round(fraction * live) are marked Bad. Statuses and logs are untouched.
    """
    live = [s.id for s in cluster.servers if s.status is not ServerStatus.REMOVED]
    for sid in live:
        cluster.set_health(sid, Health.GOOD)
    n_bad = _mark_bad_subset(cluster, live, model.systematic_fraction, rng)
    logger.debug("regenerated bad set: %d of %d live servers", n_bad, len(live))
    return n_bad


def next_regeneration(now: SimTime, model: FailureModel) -> float:
    if model.regeneration_period is None or model.regeneration_period <= 0:
        return math.inf
    return now + model.regeneration_period
