# backend_repair_pipeline.py
"""
Diagnosis, the automated -> manual repair pipeline, and failure-score removal.

Every plan is independent of every other plan: a plan only reads its own
server and its own draws, and repairs never queue behind each other.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from backend_cluster_model import Health, Server, ServerStatus
from backend_errors import InvariantViolation
from backend_param_config import SimParams
from backend_sim_kernel import EventKind, RngStream, SimKernel, SimTime

logger = logging.getLogger(__name__)


class RepairStage(Enum):
    AUTO = "Auto"
    MANUAL = "Manual"


class RepairOutcome(Enum):
    RESOLVED = "Resolved"
    UNRESOLVED = "Unresolved"


class Destination(Enum):
    RETURN_TO_JOB = "ReturnToJob"
    RETURN_TO_WORKING = "ReturnToWorking"


class RemovalDecision(Enum):
    KEEP = "Keep"
    REMOVE = "Remove"


@dataclass(frozen=True)
class RepairParams:
    auto_repair_probability: float
    auto_fail_probability: float
    manual_fail_probability: float
    auto_mean_time: float
    manual_mean_time: float
    diagnosis_uncertainty: float = 0.0
    removal_threshold: Optional[int] = None
    removal_window: Optional[float] = None

    @classmethod
    def from_params(cls, params: SimParams) -> "RepairParams":
        return cls(
            auto_repair_probability=params.auto_repair_probability,
            auto_fail_probability=params.auto_fail_probability,
            manual_fail_probability=params.manual_fail_probability,
            auto_mean_time=params.auto_repair_time,
            manual_mean_time=params.manual_repair_time,
            diagnosis_uncertainty=params.diagnosis_uncertainty,
            removal_threshold=params.removal_threshold,
            removal_window=params.removal_window,
        )

    @property
    def removal_enabled(self) -> bool:
        return self.removal_threshold is not None


@dataclass
class RepairPlan:
    plan_id: int
    server_id: int
    stages: list[tuple[RepairStage, float]]
    outcome: RepairOutcome
    started_at: SimTime
    origin_job: Optional[int] = None
    stage_index: int = 0

    @property
    def escalated(self) -> bool:
        return len(self.stages) == 2

    @property
    def total_duration(self) -> float:
        return sum(d for _, d in self.stages)

    @property
    def current_stage(self) -> RepairStage:
        return self.stages[self.stage_index][0]


def diagnose(failed_server: int, job, params: RepairParams, rng: RngStream) -> int:
    """
    With probability 1 - diagnosis_uncertainty the failed server is blamed.
    Otherwise a uniformly random other server assigned to the job (computing
    or standby) is sent to repair instead; with no other server, fall back to
    the failed one.
    """
    misdiagnosed = rng.uniform() < params.diagnosis_uncertainty
    if not misdiagnosed:
        return failed_server

    assigned = job.assigned_ids()
    if len(assigned) <= 1:
        return failed_server
    skip = assigned.index(failed_server)
    pick = rng.choice_index(len(assigned) - 1)
    if pick >= skip:
        pick += 1
    return assigned[pick]


def begin_repair(
    server: Server,
    params: RepairParams,
    rng: RngStream,
    now: SimTime = 0.0,
    plan_id: int = 0,
    kernel: Optional[SimKernel] = None,
) -> RepairPlan:
    """
    Build the plan for one failure: [Auto] with probability
    auto_repair_probability, else [Auto, Manual]. The outcome is decided by the
    final stage's fail probability. Four draws per plan, always, so plans do
    not shift each other's streams.
    """
    u_escalate = rng.uniform()
    auto_time = rng.exponential(1.0 / params.auto_mean_time)
    manual_time = rng.exponential(1.0 / params.manual_mean_time)
    u_outcome = rng.uniform()

    stages = [(RepairStage.AUTO, auto_time)]
    fail_p = params.auto_fail_probability
    if u_escalate >= params.auto_repair_probability:
        stages.append((RepairStage.MANUAL, manual_time))
        fail_p = params.manual_fail_probability
    outcome = RepairOutcome.UNRESOLVED if u_outcome < fail_p else RepairOutcome.RESOLVED

    server.move_to(ServerStatus.AUTO_REPAIR)
    plan = RepairPlan(
        plan_id=plan_id,
        server_id=server.id,
        stages=stages,
        outcome=outcome,
        started_at=now,
        origin_job=server.origin_job,
    )
    if kernel is not None:
        kernel.schedule_event(now + auto_time, EventKind.AUTO_REPAIR_DONE, {"plan_id": plan_id})
    return plan


def advance_repair(plan: RepairPlan, server: Server, kernel: SimKernel) -> bool:
    """
    Called when the current stage's completion event fires.
    Returns True when all stages have elapsed; otherwise the manual stage is
    started and its completion scheduled.
    """
    plan.stage_index += 1
    if plan.stage_index >= len(plan.stages):
        return True
    stage, duration = plan.stages[plan.stage_index]
    if stage is not RepairStage.MANUAL:
        raise InvariantViolation(f"plan {plan.plan_id}: unexpected stage {stage.value}")
    server.move_to(ServerStatus.MANUAL_REPAIR)
    kernel.schedule_event(kernel.now + duration, EventKind.MANUAL_REPAIR_DONE, {"plan_id": plan.plan_id})
    return False


def complete_repair(server: Server, plan: RepairPlan, running_job: Optional[int]) -> tuple[Server, Destination]:
    """
    Apply the plan's outcome to the server's health and pick where it goes.

    Resolved turns a Bad server Good; Unresolved leaves health alone; Good
    stays Good. The status is left for reintegration to set.
    """
    if plan.stage_index < len(plan.stages):
        raise InvariantViolation(f"plan {plan.plan_id} completed with stages still pending")
    if plan.outcome is RepairOutcome.RESOLVED and server.health is Health.BAD:
        server.health = Health.GOOD
    if running_job is not None and server.origin_job == running_job:
        return server, Destination.RETURN_TO_JOB
    return server, Destination.RETURN_TO_WORKING


def record_failure_and_check_removal(server: Server, now: SimTime, params: RepairParams) -> RemovalDecision:
    """
    Add a failure to the server's score and compare the count in the window
    (now - W, now], current failure included, against the threshold K.
    """
    server.score_log.append(now)
    if not params.removal_enabled:
        return RemovalDecision.KEEP

    start = now - params.removal_window
    recent = 0
    for t in reversed(server.score_log):
        if t <= start:
            break
        recent += 1
    if recent > params.removal_threshold:
        logger.debug("server %d removed: %d failures in window ending at %.3f", server.id, recent, now)
        return RemovalDecision.REMOVE
    return RemovalDecision.KEEP
