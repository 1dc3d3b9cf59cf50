"""Logical clock and deterministic discrete-event loop.

All orchestrator time is logical milliseconds since run start.  The
loop pops callbacks in (time, insertion-order) order, so two runs that
schedule the same work in the same order behave identically.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Callable, List, Tuple

__all__ = ["EventLoop"]


class EventLoop:
    def __init__(self, start: int = 0):
        self._now = start
        self._heap: List[Tuple[int, int, Callable[[], None]]] = []
        self._counter = itertools.count()

    @property
    def now(self) -> int:
        return self._now

    def at(self, ts: int, fn: Callable[[], None]) -> None:
        if ts < self._now:
            raise ValueError(f"cannot schedule in the past ({ts} < {self._now})")
        heapq.heappush(self._heap, (ts, next(self._counter), fn))

    def after(self, delay: int, fn: Callable[[], None]) -> None:
        self.at(self._now + delay, fn)

    def peek_time(self) -> int | None:
        """Timestamp of the next scheduled callback, if any."""
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end: int) -> None:
        """Execute everything scheduled up to and including t_end."""
        while self._heap and self._heap[0][0] <= t_end:
            ts, _, fn = heapq.heappop(self._heap)
            self._now = ts
            fn()
        self._now = max(self._now, t_end)

    def drain(self) -> None:
        """Run until the heap is empty."""
        while self._heap:
            ts, _, fn = heapq.heappop(self._heap)
            self._now = ts
            fn()

    def advance_to(self, ts: int) -> None:
        """Move the clock forward without running anything earlier.

        Only valid when nothing earlier is pending.
        """
        if self._heap and self._heap[0][0] < ts:
            raise ValueError("pending work earlier than target time")
        self._now = max(self._now, ts)
