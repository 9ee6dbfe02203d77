# backend_sim_kernel.py
"""
Discrete-event engine shared by every other backend module.

  - SimKernel: virtual clock (minutes) + future event list ordered by
    (fire_time, seq). Cancelled events are dropped lazily when they reach
    the head of the heap.
  - RngStream: one numpy Generator per (base seed, replication, label), so a
    change in one stochastic mechanism never shifts the draws of another.
"""

import heapq
import logging
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from backend_errors import SimulationFault

logger = logging.getLogger(__name__)

SimTime = float


class EventKind(Enum):
    SERVER_FAILURE = "ServerFailure"
    AUTO_REPAIR_DONE = "AutoRepairDone"
    MANUAL_REPAIR_DONE = "ManualRepairDone"
    HOST_SELECTION_DONE = "HostSelectionDone"
    RECOVERY_DONE = "RecoveryDone"
    SPARE_ACQUISITION_DONE = "SpareAcquisitionDone"
    REGENERATION_TICK = "RegenerationTick"
    JOB_COMPLETE = "JobComplete"


@dataclass(order=True)
class SimEvent:
    fire_time: SimTime
    seq: int
    kind: EventKind = field(compare=False)
    payload: dict[str, Any] = field(compare=False, default_factory=dict)
    cancelled: bool = field(compare=False, default=False)


class EventHandle:
    """Returned by schedule_event; the only way to cancel an event."""

    __slots__ = ("_event",)

    def __init__(self, event: SimEvent):
        self._event = event

    @property
    def fire_time(self) -> SimTime:
        return self._event.fire_time

    @property
    def active(self) -> bool:
        return not self._event.cancelled

    def cancel(self) -> None:
        self._event.cancelled = True


class SimKernel:
    def __init__(self):
        self.now: SimTime = 0.0
        self._queue: list[SimEvent] = []
        self._seq = 0

    def schedule_event(self, when: SimTime, kind: EventKind, payload: Optional[dict] = None) -> EventHandle:
        if not when >= self.now or math.isinf(when) or math.isnan(when):
            raise SimulationFault(f"cannot schedule {kind.value} at t={when!r} (clock is {self.now!r})")
        event = SimEvent(when, self._seq, kind, payload or {})
        self._seq += 1
        heapq.heappush(self._queue, event)
        return EventHandle(event)

    def schedule_after(self, delay: float, kind: EventKind, payload: Optional[dict] = None) -> EventHandle:
        return self.schedule_event(self.now + delay, kind, payload)

    def next_event(self) -> Optional[SimEvent]:
        """Pop the earliest live event and advance the clock; None = end of simulation."""
        while self._queue:
            event = heapq.heappop(self._queue)
            if event.cancelled:
                continue
            if event.fire_time < self.now:
                raise SimulationFault(f"clock would run backwards: {event.fire_time} < {self.now}")
            self.now = event.fire_time
            return event
        return None


class RngStream:
    """
    Labelled random stream. Exponential draws use the inverse transform on
    uniform(0,1), so they are portable and a zero rate yields +inf.
    """

    def __init__(self, base_seed: int, replication: int, label: str):
        self.base_seed = int(base_seed)
        self.replication = int(replication)
        self.label = label
        # crc32 rather than hash(): str hashing is salted per process
        key = zlib.crc32(label.encode("utf-8"))
        seq = np.random.SeedSequence([self.base_seed & 0xFFFFFFFFFFFFFFFF, self.replication, key])
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def uniform(self) -> float:
        return float(self._gen.random())

    def exponential(self, rate: float) -> float:
        u = self.uniform()
        if rate <= 0.0:
            return math.inf
        return -math.log1p(-u) / rate

    def exponentials(self, rates: np.ndarray) -> np.ndarray:
        rates = np.asarray(rates, dtype=float)
        u = self._gen.random(rates.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -np.log1p(-u) / rates
        return np.where(rates > 0.0, out, np.inf)

    def choice_index(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("choice_index needs n >= 1")
        return int(self._gen.integers(n))

    def sample(self, items: Sequence, k: int) -> list:
        """k distinct items, uniformly, in draw order."""
        if k <= 0:
            return []
        k = min(k, len(items))
        idx = self._gen.choice(len(items), size=k, replace=False)
        return [items[int(i)] for i in idx]

    def __repr__(self):
        return f"RngStream(seed={self.base_seed}, rep={self.replication}, label={self.label!r})"


def spawn_rng_stream(base_seed: int, replication: int, label: str) -> RngStream:
    return RngStream(base_seed, replication, label)


def derive_cell_seed(base_seed: int, cell_index: int) -> int:
    """Seed for one sweep cell; replications of the cell then split it by index."""
    state = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(cell_index)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
