"""Cells, links, switch output ports and static VC routes."""

from __future__ import annotations

from .engine import NS_PER_S, interval_ns

CELL_BYTES = 53
CELL_BITS = CELL_BYTES * 8
CELL_PAYLOAD = 48
PROP_NS_PER_KM = 5_000

DATA = 0
FRM = 1
BRM = 2


class ConfigurationError(RuntimeError):
    pass


class Cell:
    """One ATM cell. ``seg`` is set only on the last cell of an AAL5 frame."""

    __slots__ = ("vc", "vc_id", "kind", "er", "ccr", "seg", "hop")

    def __init__(self, vc, kind=DATA, er=0.0, ccr=0.0, seg=None):
        self.vc = vc
        self.vc_id = vc.vc_id
        self.kind = kind
        self.er = er
        self.ccr = ccr
        self.seg = seg
        self.hop = 0

    @property
    def seg_marker(self) -> bool:
        return self.seg is not None

    def __repr__(self) -> str:
        kind = ("DATA", "FRM", "BRM")[self.kind]
        return f"Cell(vc={self.vc_id}, {kind}, er={self.er:.0f}, ccr={self.ccr:.0f})"


class Link:
    """Unidirectional point-to-point link serving cells FIFO at a fixed rate.

    Only the time the transmitter frees up is kept: a cell offered at ``now``
    starts at ``max(now, free_at)`` and reaches the far end one serialization
    time plus the propagation delay later.
    """

    __slots__ = ("name", "rate", "length_km", "prop_delay", "cell_time", "cell_rate", "free_at")

    def __init__(self, rate: float, length_km: float, name: str = ""):
        self.name = name
        self.rate = float(rate)
        self.length_km = length_km
        self.prop_delay = int(length_km * PROP_NS_PER_KM + 0.5)
        self.cell_time = interval_ns(self.rate / CELL_BITS)
        self.cell_rate = self.rate / CELL_BITS
        self.free_at = 0

    def transmit(self, now: int) -> int:
        """Serialize one cell offered at ``now``; return its arrival time at the far end."""
        start = self.free_at if self.free_at > now else now
        self.free_at = start + self.cell_time
        return self.free_at + self.prop_delay

    def backlog(self, now: int) -> int:
        """Cells in the transmitter at ``now``, including the one on the wire."""
        ahead = self.free_at - now
        if ahead <= 0:
            return 0
        return -(-ahead // self.cell_time)


class SwitchPort:
    """Output-queued switch port with an unbounded FIFO feeding ``link``.

    Cells travel along their VC's hop list; after queueing here the next hop
    receives the cell when it reaches the far end of ``link``.
    """

    __slots__ = ("sim", "name", "link", "erica", "cells_in", "max_queue", "on_queue")

    def __init__(self, sim, link: Link, name: str = ""):
        self.sim = sim
        self.name = name
        self.link = link
        self.erica = None
        self.cells_in = 0
        self.max_queue = 0
        self.on_queue = None  # callable(port, now, qlen) notified on every enqueue

    def queue_len(self, now: int) -> int:
        return self.link.backlog(now)

    def cells_out(self, now: int) -> int:
        return self.cells_in - self.queue_len(now)

    def accept(self, cell: Cell) -> None:
        now = self.sim.now
        erica = self.erica
        if erica is not None:
            erica.on_cell_arrival(cell, now)
        link = self.link
        start = link.free_at if link.free_at > now else now
        dep = start + link.cell_time
        link.free_at = dep
        self.cells_in += 1
        qlen = -(-(dep - now) // link.cell_time)
        if qlen > self.max_queue:
            self.max_queue = qlen
        if self.on_queue is not None:
            self.on_queue(self, now, qlen)
        hop = cell.hop + 1
        cell.hop = hop
        path = cell.vc.bwd_hops if cell.kind == BRM else cell.vc.fwd_hops
        self.sim.schedule(dep + link.prop_delay, path[hop], cell)


class BrmStamp:
    """Switch entry for backward RM cells: stamp with the VC's forward-port ER, then queue."""

    __slots__ = ("sim", "out_port", "fwd_port")

    def __init__(self, sim, out_port: SwitchPort, fwd_port: SwitchPort):
        self.sim = sim
        self.out_port = out_port
        self.fwd_port = fwd_port

    def __call__(self, cell: Cell) -> None:
        erica = self.fwd_port.erica
        if erica is not None:
            erica.stamp_brm(cell, self.sim.now)
        self.out_port.accept(cell)


class RouteTable:
    """Static per-VC routes: ordered hop names for each direction."""

    def __init__(self) -> None:
        self._routes: dict[int, list[str]] = {}

    def register(self, vc_id: int, hops: list[str]) -> None:
        self._routes[vc_id] = list(hops)

    def route(self, vc_id: int) -> list[str]:
        try:
            return list(self._routes[vc_id])
        except KeyError:
            raise ConfigurationError(f"unknown vc_id {vc_id}") from None

    def reverse(self, vc_id: int) -> list[str]:
        return self.route(vc_id)[::-1]

    def __len__(self) -> int:
        return len(self._routes)


def cell_time_s(rate_bps: float) -> float:
    return CELL_BITS / rate_bps


def transit_ns(rate_bps: float, length_km: float) -> int:
    """Serialization plus propagation for one cell on an idle link."""
    return interval_ns(rate_bps / CELL_BITS) + int(length_km * PROP_NS_PER_KM + 0.5)


__all__ = [
    "BRM", "CELL_BITS", "CELL_BYTES", "CELL_PAYLOAD", "DATA", "FRM", "NS_PER_S",
    "BrmStamp", "Cell", "ConfigurationError", "Link", "RouteTable", "SwitchPort",
    "cell_time_s", "transit_ns",
]
