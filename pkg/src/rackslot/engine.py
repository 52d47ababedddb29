"""Discrete-event core: integer-nanosecond clock, event queue, link arithmetic.

All virtual time is kept in whole nanoseconds.  Events fire in
(fire_time, sequence) order, where the sequence number is a global counter
stamped at scheduling time, so same-timestamp events dispatch in the order
they were scheduled and a run is a single deterministic total order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

SimTime = int

NS_PER_SEC = 1_000_000_000


class SchedulingInPastError(ValueError):
    """An event was scheduled before the current virtual time."""


@dataclass(slots=True)
class Event:
    """A scheduled callback.  ``sequence`` is stamped by the simulator."""

    fire_time: SimTime
    action: Callable[[], None]
    sequence: int = -1


@dataclass(frozen=True, slots=True)
class LinkModel:
    """A unidirectional link: fixed rate plus a constant latency pad.

    ``latency_ns`` covers propagation and any fixed per-hop handoff cost;
    serialization time is computed per packet from ``rate_bps``.
    """

    rate_bps: int
    latency_ns: SimTime = 0

    def __post_init__(self) -> None:
        if self.rate_bps <= 0:
            raise ValueError("link rate must be positive")
        if self.latency_ns < 0:
            raise ValueError("link latency must be >= 0")


def serialization_delay(nbytes: int, link: "LinkModel | int") -> SimTime:
    """Nanoseconds to clock ``nbytes`` onto the wire, rounded up.

    ``link`` may be a LinkModel or a plain bit rate.  Zero-byte frames are
    rejected; nothing on the wire is free.
    """
    rate = link.rate_bps if isinstance(link, LinkModel) else link
    if nbytes <= 0:
        raise ValueError("frame size must be positive")
    if rate <= 0:
        raise ValueError("link rate must be positive")
    return -(-nbytes * 8 * NS_PER_SEC // rate)


def _run_event(ev: Event) -> None:
    ev.action()


class Simulator:
    """Single-threaded event loop over a heapq of (time, seq, fn, arg)."""

    __slots__ = ("now", "events_dispatched", "_heap", "_seq")

    def __init__(self) -> None:
        self.now: SimTime = 0
        self.events_dispatched = 0
        self._heap: list = []
        self._seq = 0

    def post(self, fire_time: SimTime, fn: Callable, arg=None) -> None:
        """Fast-path scheduling: at ``fire_time`` call ``fn(arg)``."""
        if fire_time < self.now:
            raise SchedulingInPastError(
                f"cannot schedule at t={fire_time} (now t={self.now})"
            )
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_time, seq, fn, arg))

    def after(self, delay: SimTime, fn: Callable, arg=None) -> None:
        self.post(self.now + delay, fn, arg)

    def schedule(self, event: Event) -> Event:
        """Queue ``event`` and stamp its dispatch sequence number."""
        if event.fire_time < self.now:
            raise SchedulingInPastError(
                f"cannot schedule at t={event.fire_time} (now t={self.now})"
            )
        event.sequence = self._seq
        self.post(event.fire_time, _run_event, event)
        return event

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: Optional[SimTime] = None) -> None:
        """Dispatch events in order until the queue drains.

        With ``until`` set, events with fire_time <= until are dispatched and
        the clock is then advanced to the horizon even if nothing fired there.
        """
        heap = self._heap
        pop = heapq.heappop
        horizon = (1 << 62) if until is None else until
        dispatched = 0
        while heap:
            item = heap[0]
            t = item[0]
            if t > horizon:
                break
            pop(heap)
            self.now = t
            item[2](item[3])
            dispatched += 1
        self.events_dispatched += dispatched
        if until is not None and self.now < until:
            self.now = until
