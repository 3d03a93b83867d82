"""Discrete-event kernel: virtual clock, ordered event queue and seeded RNG streams."""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

#: Generator used for every random stream in a run.  PCG64 via numpy's
#: ``default_rng``; streams are derived from one root ``SeedSequence``.
RNG_ALGORITHM = "numpy.PCG64"


class EventKind(enum.Enum):
    MOBILITY_TICK = "MobilityTick"
    BEACON_TICK = "BeaconTick"
    DETECTION_CHECK = "EventDetectionCheck"
    PACKET_ARRIVAL = "PacketArrival"
    SIM_END = "SimEnd"


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(frozen=True, order=True)
class SimEvent:
    timestamp: float
    sequence: int
    kind: EventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)


@dataclass
class SimClock:
    end: float
    now: float = 0.0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise SchedulingError(f"clock cannot move backwards ({t} < {self.now})")
        if t > self.end:
            raise SchedulingError(f"clock cannot pass end of run ({t} > {self.end})")
        self.now = t


class EventQueue:
    """Min-heap on (timestamp, insertion sequence)."""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: list[SimEvent] = []
        self._counter = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, timestamp: float, kind: EventKind, payload: Any = None) -> SimEvent:
        if timestamp < self.clock.now:
            raise SchedulingError(
                f"{kind.value} scheduled at t={timestamp} but clock is at {self.clock.now}"
            )
        event = SimEvent(timestamp, next(self._counter), kind, payload)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> SimEvent:
        event = heapq.heappop(self._heap)
        self.clock.advance(event.timestamp)
        return event

    def peek(self) -> SimEvent | None:
        return self._heap[0] if self._heap else None


@dataclass(frozen=True)
class RngState:
    seed: int
    algorithm: str = RNG_ALGORITHM

    def stream(self, name: str) -> np.random.Generator:
        """Independent generator for a named consumer (``"mobility"``, ``"community"``...).

        Streams do not depend on the order in which they are requested.
        """
        key = [ord(c) for c in name]
        seq = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *key])
        return np.random.Generator(np.random.PCG64(seq))


def tick_times(period: float, start: float, end: float) -> list[float]:
    """Times ``start + k*period`` that are ``< end``, computed without accumulation drift."""
    if period <= 0:
        raise ValueError("period must be positive")
    out = []
    k = 0
    while True:
        t = round(start + k * period, 9)
        if t >= end:
            return out
        out.append(t)
        k += 1
