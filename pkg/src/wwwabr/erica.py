"""ERICA+ explicit-rate allocation for one switch output port."""

from __future__ import annotations

from dataclasses import dataclass

from .engine import NS_PER_S
from .fabric import BRM, FRM


@dataclass(frozen=True)
class EricaParams:
    interval_cells: int = 500
    interval_time: float = 5e-3  # seconds
    t0: float = 500e-6  # target queueing delay, seconds
    a: float = 1.15
    b: float = 1.05
    qdlf: float = 0.5

    def __post_init__(self) -> None:
        if not self.a > 1:
            raise ValueError("erica.a must exceed 1")
        if not self.b > 1:
            raise ValueError("erica.b must exceed 1")
        if not 0 < self.qdlf <= 1:
            raise ValueError("erica.qdlf must lie in (0, 1]")
        if not self.t0 > 0:
            raise ValueError("erica.t0 must be positive")
        if self.interval_cells < 1:
            raise ValueError("erica.interval_cells must be at least 1")
        if not self.interval_time > 0:
            raise ValueError("erica.interval_time must be positive")


def queue_fraction(q: float, params: EricaParams, q0: float) -> float:
    """Fraction of link capacity offered to ABR sources when ``q`` cells are queued.

    Two hyperbolas meeting at ``q0`` with value 1: ``a`` at an empty queue,
    decaying towards the ``qdlf`` floor as the queue grows.
    """
    if q <= q0:
        return params.a * q0 / ((params.a - 1.0) * q + q0)
    return max(params.qdlf, params.b * q0 / ((params.b - 1.0) * q + q0))


class EricaPortState:
    """Per-port measurement accumulators and the most recent allocation.

    ``queue_len`` is a callable returning the port's queue length in cells at a
    given time (ns); the port supplies it.
    """

    __slots__ = (
        "params", "link_cell_rate", "q0", "queue_len",
        "cells_received", "active_vcs", "vc_ccr",
        "z", "fair_share", "target_abr_capacity", "last_interval_end",
        "_interval_ns", "_interval_cells", "intervals", "trace",
    )

    def __init__(self, params: EricaParams, link_cell_rate: float, queue_len=None, start: int = 0):
        self.params = params
        self.link_cell_rate = link_cell_rate
        self.q0 = max(1.0, params.t0 * link_cell_rate)
        self.queue_len = queue_len if queue_len is not None else (lambda now: 0)
        self.cells_received = 0
        self.active_vcs: set[int] = set()
        self.vc_ccr: dict[int, float] = {}
        self.z: float | None = None
        self.target_abr_capacity = queue_fraction(0, params, self.q0) * link_cell_rate
        self.fair_share = self.target_abr_capacity
        self.last_interval_end = start
        self._interval_ns = int(params.interval_time * NS_PER_S + 0.5)
        self._interval_cells = params.interval_cells
        self.intervals = 0
        # Optional list receiving (time_ns, q, z, fair_share, capacity) per interval.
        self.trace: list | None = None

    def on_cell_arrival(self, cell, now: int) -> None:
        self.cells_received += 1
        kind = cell.kind
        if kind != BRM:
            # Backward RM cells belong to a VC flowing the other way; they use
            # capacity but do not make a source active here.
            self.active_vcs.add(cell.vc_id)
            if kind == FRM:
                self.vc_ccr[cell.vc_id] = cell.ccr
        if (self.cells_received >= self._interval_cells
                or now - self.last_interval_end >= self._interval_ns):
            self.end_interval(now)

    def end_interval(self, now: int) -> None:
        elapsed = now - self.last_interval_end
        q = self.queue_len(now)
        self.target_abr_capacity = queue_fraction(q, self.params, self.q0) * self.link_cell_rate
        if self.cells_received and elapsed > 0:
            input_rate = self.cells_received * NS_PER_S / elapsed
            self.z = input_rate / self.target_abr_capacity
            self.fair_share = self.target_abr_capacity / max(1, len(self.active_vcs))
        # An empty interval keeps the previous overload factor and fair share.
        self.cells_received = 0
        self.active_vcs = set()
        self.last_interval_end = now
        self.intervals += 1
        if self.trace is not None:
            self.trace.append((now, q, self.z, self.fair_share, self.target_abr_capacity))

    def poll(self, now: int) -> None:
        """Close an interval whose timer has run out without a triggering arrival."""
        if now - self.last_interval_end >= self._interval_ns:
            self.end_interval(now)

    def compute_er(self, vc_id: int) -> float:
        cap = self.target_abr_capacity
        z = self.z
        if z is None:
            return cap
        vc_share = self.vc_ccr.get(vc_id, 0.0) / z
        er = self.fair_share if self.fair_share > vc_share else vc_share
        return er if er < cap else cap

    def stamp_brm(self, brm, now: int):
        """Lower ``brm.er`` to this port's allocation for the BRM's VC; never raise it."""
        self.poll(now)
        er = self.compute_er(brm.vc_id)
        if er < brm.er:
            brm.er = er
        return brm
