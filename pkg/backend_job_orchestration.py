# backend_job_orchestration.py
"""
Scheduler + Coordinator for the single training job.

Flow of one run:
  start_job -> (AcquireSpares ->) HostSelection -> Recovery -> Computing
  Computing --failure--> diagnose -> repair/remove target
      standby left  -> swap -> Recovery -> Computing
      none left     -> start_job again (host selection + recovery)
      pools empty   -> Stalled until a repaired server comes back
  Computing --remaining_length elapsed--> Done

Failure hazard accrues only while Computing. Every (re)start of a compute
segment discards the old draws and samples fresh ones for the whole
computing set; only the earliest draw becomes a ServerFailure event.
"""

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum
from itertools import islice
from typing import Optional

import numpy as np

from backend_cluster_model import (
    FAILURE_SAMPLERS,
    Cluster,
    FailureKind,
    FailureModel,
    Health,
    PoolState,
    Server,
    ServerStatus,
    build_cluster,
    next_regeneration,
    regenerate_bad_set,
    sample_segment_failures,
    segment_hazard,
)
from backend_errors import ConfigError, InvariantViolation, JobStarvedError, SimulationFault
from backend_param_config import SimParams
from backend_repair_pipeline import (
    Destination,
    RemovalDecision,
    RepairParams,
    RepairPlan,
    advance_repair,
    begin_repair,
    complete_repair,
    diagnose,
    record_failure_and_check_removal,
)
from backend_sim_kernel import EventHandle, EventKind, RngStream, SimEvent, SimKernel, spawn_rng_stream

logger = logging.getLogger(__name__)

JOB_ID = 0

# Columns of the summary CSV, in order.
METRICS = (
    "total_time",
    "failures_total",
    "failures_random",
    "failures_systematic",
    "preemptions",
    "auto_repairs",
    "manual_repairs",
    "avg_run_duration",
    "stalls",
)


class JobPhase(Enum):
    HOST_SELECTION = "HostSelection"
    COMPUTING = "Computing"
    RECOVERING = "Recovering"
    ACQUIRING_SPARES = "AcquiringSpares"
    STALLED = "Stalled"
    DONE = "Done"


class Placement(Enum):
    JOB_STANDBY = "JobStandby"
    WORKING_POOL = "WorkingPool"
    SPARE_POOL = "SparePool"


@dataclass(frozen=True)
class JobSpec:
    job_size: int
    job_length: float
    warm_standbys: int
    recovery_time: float
    host_selection_time: float
    waiting_time: float
    preemption_cost_per_server: float = 0.0

    def __post_init__(self):
        if self.job_size < 1 or self.job_length <= 0:
            raise ConfigError("job_size must be >= 1 and job_length > 0")
        if min(self.warm_standbys, self.recovery_time, self.host_selection_time,
               self.waiting_time, self.preemption_cost_per_server) < 0:
            raise ConfigError("job durations and warm_standbys must be >= 0")

    @classmethod
    def from_params(cls, params: SimParams) -> "JobSpec":
        return cls(
            job_size=params.job_size,
            job_length=params.job_length,
            warm_standbys=params.warm_standbys,
            recovery_time=params.recovery_time,
            host_selection_time=params.host_selection_time,
            waiting_time=params.waiting_time,
            preemption_cost_per_server=params.preemption_cost_per_server,
        )


@dataclass
class JobState:
    job_id: int
    spec: JobSpec
    phase: JobPhase = JobPhase.HOST_SELECTION
    computing_servers: dict[int, None] = field(default_factory=dict)
    standby_servers: deque = field(default_factory=deque)
    # picked by host selection / spare acquisition, placed when host selection completes
    reserved: list[int] = field(default_factory=list)
    remaining_length: float = 0.0
    segment_start: float = 0.0
    segments: list[float] = field(default_factory=list)
    failures_random: int = 0
    failures_systematic: int = 0
    preemptions: int = 0
    stalls: int = 0
    standby_swaps: int = 0
    host_selections: int = 0
    spare_acquisitions: int = 0

    def __post_init__(self):
        if not self.remaining_length:
            self.remaining_length = self.spec.job_length

    @property
    def failures_total(self) -> int:
        return self.failures_random + self.failures_systematic

    @property
    def running(self) -> bool:
        return self.phase is not JobPhase.DONE

    def assigned_ids(self) -> list[int]:
        return [*self.computing_servers, *self.standby_servers]

    def held(self) -> int:
        return len(self.computing_servers) + len(self.standby_servers) + len(self.reserved)


@dataclass
class RunResult:
    seed: int
    replication: int
    total_time: float
    failures_total: int
    failures_random: int
    failures_systematic: int
    preemptions: int
    auto_repairs: int
    manual_repairs: int
    avg_run_duration: float
    stalls: int
    preemption_cost: float
    compute_segments: int
    standby_swaps: int
    host_selections: int
    spare_acquisitions: int
    removed_servers: int
    misdiagnoses: int
    hazard_exposure: float

    def as_dict(self) -> dict:
        return asdict(self)


def select_servers(pool: dict[int, None], k: int, servers: list[Server], policy: str, rng: RngStream) -> list[int]:
    """Host-selection method: which k idle servers of a pool the job gets."""
    if k <= 0:
        return []
    if policy == "first_fit":
        return list(islice(pool, k))
    if policy == "random":
        return rng.sample(list(pool), k)
    if policy == "least_failures":
        return sorted(pool, key=lambda sid: len(servers[sid].failure_log))[:k]
    raise ConfigError(f"unknown host_selection_policy {policy!r}")


def swap_warm_standby(job: JobState, departing: int) -> JobState:
    """First standby (FIFO) replaces the departing computing server."""
    if not job.standby_servers:
        raise InvariantViolation("swap_warm_standby called with no standbys left")
    if departing not in job.computing_servers:
        raise InvariantViolation(f"server {departing} is not computing for job {job.job_id}")
    del job.computing_servers[departing]
    job.computing_servers[job.standby_servers.popleft()] = None
    job.standby_swaps += 1
    return job


def acquire_from_spare(
    pools: PoolState,
    n: int,
    spec: JobSpec,
    servers: Optional[list[Server]] = None,
    policy: str = "first_fit",
    rng: Optional[RngStream] = None,
) -> tuple[float, list[int], float]:
    """
    Preempt min(n, |spare|) spare servers as one batch.
    Returns (delay, server ids, accounted preemption cost). The pool is not
    touched here; the ids leave the spare pool when the delay has elapsed.
    """
    if n < 1 or not pools.spare:
        raise InvariantViolation(f"acquire_from_spare needs n >= 1 and a nonempty spare pool (n={n})")
    m = min(n, len(pools.spare))
    acquired = select_servers(pools.spare, m, servers or [], policy, rng) if servers else list(islice(pools.spare, m))
    return spec.waiting_time, acquired, m * spec.preemption_cost_per_server


class ClusterSimulation:
    """One replication: owns the kernel, the cluster, the job and every in-flight repair."""

    def __init__(self, params: SimParams, seed: int, replication: int = 0, trace: Optional[list] = None):
        params.validate()
        self.params = params
        self.seed = seed
        self.replication = replication
        self.trace = trace

        self.kernel = SimKernel()
        self.rng_failure = spawn_rng_stream(seed, replication, "failure")
        self.rng_repair = spawn_rng_stream(seed, replication, "repair")
        self.rng_diagnosis = spawn_rng_stream(seed, replication, "diagnosis")
        self.rng_topology = spawn_rng_stream(seed, replication, "topology")
        self.rng_placement = spawn_rng_stream(seed, replication, "placement")
        self.rng_regeneration = spawn_rng_stream(seed, replication, "regeneration")

        self.failure_model = FailureModel.from_params(params)
        self.repair_params = RepairParams.from_params(params)
        self.sampler = FAILURE_SAMPLERS[params.failure_distribution]
        self.spec = JobSpec.from_params(params)

        self.cluster: Cluster = build_cluster(params, self.rng_topology)
        self.job = JobState(JOB_ID, self.spec, remaining_length=self.spec.job_length)

        self.plans: dict[int, RepairPlan] = {}
        self._next_plan_id = 0
        self._failure_handle: Optional[EventHandle] = None
        self._complete_handle: Optional[EventHandle] = None
        self._pending_spares: list[int] = []
        self._segment_hazard = 0.0
        self._hazard_mark = 0.0

        self.auto_repairs = 0
        self.manual_repairs = 0
        self.removed_servers = 0
        self.misdiagnoses = 0
        self.preemption_cost = 0.0
        self.hazard_exposure = 0.0

        self._handlers = {
            EventKind.SERVER_FAILURE: self._on_server_failure,
            EventKind.AUTO_REPAIR_DONE: self._on_repair_stage_done,
            EventKind.MANUAL_REPAIR_DONE: self._on_repair_stage_done,
            EventKind.HOST_SELECTION_DONE: self._on_host_selection_done,
            EventKind.RECOVERY_DONE: self._on_recovery_done,
            EventKind.SPARE_ACQUISITION_DONE: self._on_spare_acquisition_done,
            EventKind.REGENERATION_TICK: self._on_regeneration_tick,
            EventKind.JOB_COMPLETE: self._on_job_complete,
        }

        if params.working_pool_size < params.job_size + params.warm_standbys:
            logger.warning(
                "working pool (%d) cannot hold job_size + warm_standbys (%d); the rest comes from the spare pool",
                params.working_pool_size, params.job_size + params.warm_standbys,
            )

    @property
    def servers(self) -> list[Server]:
        return self.cluster.servers

    @property
    def pools(self) -> PoolState:
        return self.cluster.pools

    # ─────────────────────────────────────────────────────────────
    # main loop
    # ─────────────────────────────────────────────────────────────
    def run(self) -> RunResult:
        self.start_job()
        tick_at = next_regeneration(self.kernel.now, self.failure_model)
        if math.isfinite(tick_at):
            self.kernel.schedule_event(tick_at, EventKind.REGENERATION_TICK)

        while self.job.running:
            event = self.kernel.next_event()
            if event is None:
                raise SimulationFault("event queue drained before the job completed")
            if self.trace is not None:
                self.trace.append((event.fire_time, event.kind.value, tuple(sorted(event.payload.items()))))
            self._handlers[event.kind](event)
            if self.params.debug_checks:
                self.check_invariants()

        result = self._result()
        logger.info(
            "seed=%d rep=%d done at t=%.1f: %d failures (%d systematic), %d preemptions, %d stalls",
            self.seed, self.replication, result.total_time, result.failures_total,
            result.failures_systematic, result.preemptions, result.stalls,
        )
        return result

    def _result(self) -> RunResult:
        job = self.job
        return RunResult(
            seed=self.seed,
            replication=self.replication,
            total_time=self.kernel.now,
            failures_total=job.failures_total,
            failures_random=job.failures_random,
            failures_systematic=job.failures_systematic,
            preemptions=job.preemptions,
            auto_repairs=self.auto_repairs,
            manual_repairs=self.manual_repairs,
            avg_run_duration=self.spec.job_length / (job.failures_total + 1),
            stalls=job.stalls,
            preemption_cost=self.preemption_cost,
            compute_segments=len(job.segments),
            standby_swaps=job.standby_swaps,
            host_selections=job.host_selections,
            spare_acquisitions=job.spare_acquisitions,
            removed_servers=self.removed_servers,
            misdiagnoses=self.misdiagnoses,
            hazard_exposure=self.hazard_exposure,
        )

    # ─────────────────────────────────────────────────────────────
    # Scheduler
    # ─────────────────────────────────────────────────────────────
    def start_job(self) -> None:
        """
        1) Reserve job_size + warm_standbys servers, counting those the job still holds.
        2) Take from the working pool first; request any shortfall from the spare pool.
        3) Stall if working + spare together cannot reach job_size.
        """
        job, pools, spec = self.job, self.pools, self.spec
        held = job.held()
        if held + len(pools.working) + len(pools.spare) < spec.job_size:
            self._stall()
            return

        want = spec.job_size + spec.warm_standbys - held
        picked = select_servers(pools.working, min(want, len(pools.working)), self.servers,
                                self.params.host_selection_policy, self.rng_placement)
        for sid in picked:
            del pools.working[sid]
            self._reserve(sid)

        short = want - len(picked)
        if short > 0 and pools.spare:
            delay, acquired, cost = acquire_from_spare(
                pools, short, spec, self.servers, self.params.host_selection_policy, self.rng_placement
            )
            self._pending_spares = acquired
            job.preemptions += len(acquired)
            job.spare_acquisitions += 1
            self.preemption_cost += cost
            job.phase = JobPhase.ACQUIRING_SPARES
            self.kernel.schedule_after(delay, EventKind.SPARE_ACQUISITION_DONE, {"servers": len(acquired)})
            logger.debug("t=%.3f preempting %d spare servers", self.kernel.now, len(acquired))
            return

        self._begin_host_selection()

    def _reserve(self, sid: int) -> None:
        server = self.servers[sid]
        server.move_to(ServerStatus.STANDBY)
        server.origin_job = self.job.job_id
        self.job.reserved.append(sid)

    def _begin_host_selection(self) -> None:
        self.job.phase = JobPhase.HOST_SELECTION
        self.kernel.schedule_after(self.spec.host_selection_time, EventKind.HOST_SELECTION_DONE)

    def _stall(self) -> None:
        job = self.job
        if job.phase is not JobPhase.STALLED:
            job.stalls += 1
            job.phase = JobPhase.STALLED
            logger.warning("t=%.3f job stalled: holds %d of %d servers", self.kernel.now, job.held(), self.spec.job_size)
        if not self.plans and not self._pending_spares:
            raise JobStarvedError(
                f"job stalled at t={self.kernel.now:.1f} with {job.held()} servers, "
                f"{self.pools.removed_count} removed and no repair in flight"
            )

    def _on_spare_acquisition_done(self, event: SimEvent) -> None:
        for sid in self._pending_spares:
            del self.pools.spare[sid]
            self._reserve(sid)
        self._pending_spares = []
        self._begin_host_selection()

    def _on_host_selection_done(self, event: SimEvent) -> None:
        job = self.job
        job.host_selections += 1
        queue = [*job.standby_servers, *job.reserved]
        job.standby_servers.clear()
        job.reserved.clear()
        for sid in queue:
            if len(job.computing_servers) < self.spec.job_size:
                job.computing_servers[sid] = None
                self.servers[sid].move_to(ServerStatus.COMPUTING)
            else:
                job.standby_servers.append(sid)
        if len(job.computing_servers) != self.spec.job_size:
            raise InvariantViolation(
                f"host selection placed {len(job.computing_servers)} computing servers, need {self.spec.job_size}"
            )
        self._begin_recovery()

    def _begin_recovery(self) -> None:
        self.job.phase = JobPhase.RECOVERING
        self.kernel.schedule_after(self.spec.recovery_time, EventKind.RECOVERY_DONE)

    def _on_recovery_done(self, event: SimEvent) -> None:
        job = self.job
        job.phase = JobPhase.COMPUTING
        job.segment_start = self.kernel.now
        self._complete_handle = self.kernel.schedule_after(job.remaining_length, EventKind.JOB_COMPLETE)
        self._draw_failures()

    def _draw_failures(self) -> None:
        """Fresh draws for the computing set, from now; only the earliest is scheduled."""
        job = self.job
        now = self.kernel.now
        ids = np.fromiter(job.computing_servers, dtype=np.int64, count=len(job.computing_servers))
        delays, systematic = sample_segment_failures(self.cluster, ids, self.failure_model, self.rng_failure, self.sampler)
        self._segment_hazard = segment_hazard(self.cluster, ids, self.failure_model)
        self._hazard_mark = now

        left = job.remaining_length - (now - job.segment_start)
        first = int(np.argmin(delays))
        delay = float(delays[first])
        # ties with completion go to completion: it was scheduled first
        if math.isfinite(delay) and delay <= left:
            kind = FailureKind.SYSTEMATIC if systematic[first] else FailureKind.RANDOM
            self._failure_handle = self.kernel.schedule_after(
                delay, EventKind.SERVER_FAILURE, {"server": int(ids[first]), "kind": kind.value}
            )

    def _accrue_hazard(self) -> None:
        now = self.kernel.now
        self.hazard_exposure += self._segment_hazard * (now - self._hazard_mark)
        self._hazard_mark = now

    def _on_job_complete(self, event: SimEvent) -> None:
        job = self.job
        self._accrue_hazard()
        if self._failure_handle is not None:
            self._failure_handle.cancel()
            self._failure_handle = None
        job.segments.append(job.remaining_length)
        job.remaining_length = 0.0
        job.phase = JobPhase.DONE
        if self.params.debug_checks:
            total = math.fsum(job.segments)
            if not math.isclose(total, self.spec.job_length, rel_tol=1e-9, abs_tol=1e-9):
                raise InvariantViolation(f"compute segments sum to {total}, job_length is {self.spec.job_length}")

    # ─────────────────────────────────────────────────────────────
    # Coordinator
    # ─────────────────────────────────────────────────────────────
    def _on_server_failure(self, event: SimEvent) -> None:
        job = self.job
        now = self.kernel.now
        sid = event.payload["server"]
        kind = FailureKind(event.payload["kind"])

        self._failure_handle = None
        if self._complete_handle is not None:
            self._complete_handle.cancel()
            self._complete_handle = None
        self._accrue_hazard()

        elapsed = min(now - job.segment_start, job.remaining_length)
        job.remaining_length -= elapsed
        job.segments.append(elapsed)

        server = self.servers[sid]
        if self.params.debug_checks:
            if server.status is not ServerStatus.COMPUTING:
                raise InvariantViolation(f"server {sid} failed while {server.status.value}")
            if kind is FailureKind.SYSTEMATIC and server.health is not Health.BAD:
                raise InvariantViolation(f"systematic failure on Good server {sid}")
        if kind is FailureKind.SYSTEMATIC:
            job.failures_systematic += 1
        else:
            job.failures_random += 1
        server.failure_log.append((now, kind))
        job.phase = JobPhase.RECOVERING
        logger.debug("t=%.3f server %d failed (%s), %.1f min of compute left", now, sid, kind.value, job.remaining_length)

        self.handle_failure(sid)

    def handle_failure(self, failed: int) -> None:
        """
        All computing has stopped. Blame a server, send it to repair (or
        remove it), then resume via a standby swap or a full restart.
        """
        job = self.job
        target = diagnose(failed, job, self.repair_params, self.rng_diagnosis)
        if target != failed:
            self.misdiagnoses += 1

        decision = record_failure_and_check_removal(self.servers[target], self.kernel.now, self.repair_params)

        target_was_computing = target in job.computing_servers
        if target_was_computing and job.standby_servers:
            incoming = job.standby_servers[0]
            swap_warm_standby(job, target)
            self.servers[incoming].move_to(ServerStatus.COMPUTING)
            resume = "swap"
        elif target_was_computing:
            del job.computing_servers[target]
            resume = "restart"
        else:
            job.standby_servers.remove(target)
            resume = "recover"

        if decision is RemovalDecision.REMOVE:
            self._remove(target)
        else:
            self._send_to_repair(target)

        if resume == "restart":
            self.start_job()
        else:
            self._begin_recovery()

    def _remove(self, sid: int) -> None:
        server = self.servers[sid]
        server.move_to(ServerStatus.REMOVED)
        server.origin_job = None
        self.pools.removed_count += 1
        self.removed_servers += 1
        logger.debug("t=%.3f server %d permanently removed", self.kernel.now, sid)

    def _send_to_repair(self, sid: int) -> None:
        plan_id = self._next_plan_id
        self._next_plan_id += 1
        plan = begin_repair(self.servers[sid], self.repair_params, self.rng_repair,
                            now=self.kernel.now, plan_id=plan_id, kernel=self.kernel)
        self.plans[plan_id] = plan
        self.auto_repairs += 1

    def _on_repair_stage_done(self, event: SimEvent) -> None:
        plan = self.plans[event.payload["plan_id"]]
        server = self.servers[plan.server_id]
        if not advance_repair(plan, server, self.kernel):
            self.manual_repairs += 1
            return
        del self.plans[plan.plan_id]
        running = self.job.job_id if self.job.running else None
        server, hint = complete_repair(server, plan, running)
        self.cluster.set_health(server.id, server.health)
        self.reintegrate_repaired(server, hint)

    def reintegrate_repaired(self, server: Server, hint: Destination) -> Placement:
        """
        Back to the job as the last standby if it came from the running job;
        otherwise to the working pool, or the spare pool once the working pool
        is at capacity. A stalled job retries host selection.
        """
        job, pools = self.job, self.pools
        if server.status is ServerStatus.REMOVED:
            raise InvariantViolation(f"removed server {server.id} cannot be reintegrated")

        if hint is Destination.RETURN_TO_JOB and job.running:
            server.move_to(ServerStatus.STANDBY)
            job.standby_servers.append(server.id)
            placement = Placement.JOB_STANDBY
        else:
            server.origin_job = None
            if len(pools.working) < pools.working_capacity:
                server.move_to(ServerStatus.IDLE_WORKING)
                pools.working[server.id] = None
                placement = Placement.WORKING_POOL
            else:
                server.move_to(ServerStatus.IDLE_SPARE)
                pools.spare[server.id] = None
                placement = Placement.SPARE_POOL

        if job.phase is JobPhase.STALLED:
            self.start_job()
        return placement

    def _on_regeneration_tick(self, event: SimEvent) -> None:
        regenerate_bad_set(self.cluster, self.failure_model, self.rng_regeneration)
        # health changed under the running segment: restart its failure clocks
        if self.job.phase is JobPhase.COMPUTING:
            self._accrue_hazard()
            if self._failure_handle is not None:
                self._failure_handle.cancel()
                self._failure_handle = None
            self._draw_failures()
        self.kernel.schedule_event(next_regeneration(self.kernel.now, self.failure_model), EventKind.REGENERATION_TICK)

    # ─────────────────────────────────────────────────────────────
    # debug checks
    # ─────────────────────────────────────────────────────────────
    def check_invariants(self) -> None:
        job = self.job
        self.cluster.check_conservation()
        computing = sum(1 for s in self.servers if s.status is ServerStatus.COMPUTING)
        if job.phase is JobPhase.COMPUTING:
            if len(job.computing_servers) != self.spec.job_size or computing != self.spec.job_size:
                raise InvariantViolation(
                    f"computing with {len(job.computing_servers)} servers ({computing} by status), "
                    f"job_size is {self.spec.job_size}"
                )
        for sid in job.standby_servers:
            if self.servers[sid].status is not ServerStatus.STANDBY:
                raise InvariantViolation(f"standby {sid} has status {self.servers[sid].status.value}")
        if job.remaining_length < 0:
            raise InvariantViolation("remaining_length went negative")
        if job.failures_total != sum(len(s.failure_log) for s in self.servers):
            raise InvariantViolation("failure counters disagree with the servers' failure logs")


def run_simulation(params: SimParams, seed: int, replication: int = 0, trace: Optional[list] = None) -> RunResult:
    """Drive one replication to JobComplete and return its metrics."""
    return ClusterSimulation(params, seed, replication, trace=trace).run()
