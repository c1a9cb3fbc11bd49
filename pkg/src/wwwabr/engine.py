"""Discrete-event kernel: integer-nanosecond clock, heap of pending events,
and named, independently seeded random streams."""

from __future__ import annotations

import heapq
import random

NS_PER_S = 1_000_000_000


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


def seconds(value: float) -> int:
    """Convert seconds to integer nanoseconds, rounding half up."""
    return int(value * NS_PER_S + 0.5)


def interval_ns(rate_per_s: float) -> int:
    """Spacing between consecutive units at ``rate_per_s``, rounded half up to 1 ns."""
    return int(NS_PER_S / rate_per_s + 0.5)


class Simulator:
    """Single-threaded event loop.

    Events are ``(fire_at, seq, action, payload)`` tuples; ``seq`` grows with
    every call to :meth:`schedule`, so events sharing a timestamp are dispatched
    in the order they were scheduled.
    """

    __slots__ = ("now", "_heap", "_seq", "_cancelled", "dispatched")

    def __init__(self) -> None:
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self.dispatched = 0

    def schedule(self, at: int, action, payload=None) -> int:
        if at < self.now:
            raise SchedulingError(f"event at {at} ns scheduled with clock at {self.now} ns")
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (at, seq, action, payload))
        return seq

    def schedule_in(self, delay: int, action, payload=None) -> int:
        return self.schedule(self.now + delay, action, payload)

    def cancel(self, handle: int) -> None:
        self._cancelled.add(handle)

    def pending(self) -> int:
        return len(self._heap) - len(self._cancelled)

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with ``fire_at <= t_end``; leave the clock at ``t_end``."""
        heap = self._heap
        cancelled = self._cancelled
        pop = heapq.heappop
        count = 0
        while heap and heap[0][0] <= t_end:
            at, seq, action, payload = pop(heap)
            if cancelled and seq in cancelled:
                cancelled.discard(seq)
                continue
            self.now = at
            action(payload)
            count += 1
        if t_end > self.now:
            self.now = t_end
        self.dispatched += count
        return count


class RngStreams:
    """Factory of independent ``random.Random`` streams keyed by label.

    A stream depends only on ``(seed, stream_id)``: string seeding hashes the
    key with SHA-512, which is stable across platforms and Python builds.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)

    def stream(self, stream_id: str) -> random.Random:
        return random.Random(f"{self.seed}/{stream_id}")


def rng_uniform(stream: random.Random) -> float:
    return stream.random()
