"""ABR end-system behaviour for one VC: pacing at ACR, in-rate FRM insertion,
ACR decay after idleness, destination turnaround and ER feedback."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import NS_PER_S, interval_ns
from .fabric import BRM, DATA, FRM, Cell

# Access-link cell rate at 155.52 Mbps.
OC3_CELL_RATE = 155.52e6 / 424


@dataclass(frozen=True)
class SesParams:
    pcr: float = OC3_CELL_RATE
    mcr: float = 0.0
    icr: float | None = None  # defaults to pcr / 10
    nrm: int = 32
    adtf: float = 0.5  # seconds

    def __post_init__(self) -> None:
        if self.icr is None:
            object.__setattr__(self, "icr", self.pcr / 10)
        if not 0 <= self.mcr <= self.icr <= self.pcr:
            raise ValueError("ses rates must satisfy mcr <= icr <= pcr")
        if self.nrm < 2:
            raise ValueError("ses.nrm must be at least 2")
        if self.adtf < 0:
            raise ValueError("ses.adtf must be non-negative")


def dest_turnaround(frm: Cell) -> Cell:
    """Turn a forward RM cell around at the destination."""
    brm = Cell(frm.vc, BRM, er=frm.er, ccr=frm.ccr)
    return brm


class AbrVc:
    """Source state of one ABR VC plus the destination-side cell handler.

    ``fwd_hops``/``bwd_hops`` are the callables a cell visits after leaving the
    source NIC (data, FRM) or the destination NIC (BRM); the scenario builder
    fills them in. ``sink`` receives each completed AAL5 frame's segment.
    """

    __slots__ = (
        "vc_id", "sim", "params", "acr", "cells_since_frm", "last_frm_sent",
        "last_cell_sent", "backlog", "nic", "dest_nic", "fwd_hops", "bwd_hops",
        "sink", "greedy", "_gap", "_pending", "_next_at", "_adtf_ns",
        "cells_sent", "frm_sent", "brm_received", "on_send",
    )

    def __init__(self, sim, vc_id: int, params: SesParams, nic=None, dest_nic=None, greedy=False):
        self.vc_id = vc_id
        self.sim = sim
        self.params = params
        self.acr = params.icr
        self._gap = interval_ns(self.acr) if self.acr > 0 else 0
        # First cell on the VC is an FRM.
        self.cells_since_frm = params.nrm - 1
        self.last_frm_sent: int | None = None
        self.last_cell_sent: int | None = None
        self.backlog: deque = deque()
        self.nic = nic
        self.dest_nic = dest_nic
        self.fwd_hops: list = []
        self.bwd_hops: list = []
        self.sink = None
        self.greedy = greedy
        self._pending: int | None = None
        self._next_at = 0
        self._adtf_ns = int(params.adtf * NS_PER_S + 0.5)
        self.cells_sent = 0
        self.frm_sent = 0
        self.brm_received = 0
        self.on_send = None  # optional callable(vc, cell, now)

    # -- source side ---------------------------------------------------------

    def _set_acr(self, acr: float) -> None:
        p = self.params
        if acr > p.pcr:
            acr = p.pcr
        elif acr < p.mcr:
            acr = p.mcr
        self.acr = acr
        self._gap = interval_ns(acr) if acr > 0 else 0

    def has_data(self) -> bool:
        return self.greedy or bool(self.backlog)

    def submit(self, ncells: int, seg) -> None:
        """Queue an AAL5 frame of ``ncells`` cells; ``seg`` rides on the last cell."""
        self.backlog.append([ncells, seg])
        if self._pending is None:
            self.apply_adtf(self.sim.now)
            self._arm(self.sim.now)

    def start(self) -> None:
        """Begin sending (for greedy sources with no explicit frames)."""
        if self._pending is None and self.has_data():
            self.apply_adtf(self.sim.now)
            self._arm(self.sim.now)

    def apply_adtf(self, now: int) -> None:
        if self.last_frm_sent is None or now - self.last_frm_sent > self._adtf_ns:
            self._set_acr(self.params.icr)

    def _arm(self, now: int) -> None:
        if self._gap <= 0:
            self._pending = None
            return
        at = now
        if self.last_cell_sent is not None:
            earliest = self.last_cell_sent + self._gap
            if earliest > at:
                at = earliest
        self._next_at = at
        self._pending = self.sim.schedule(at, self._send)

    def next_send(self, now: int) -> tuple[Cell, int]:
        """Choose the next in-rate cell and the earliest time of the following one."""
        if self.cells_since_frm >= self.params.nrm - 1:
            cell = Cell(self, FRM, er=self.params.pcr, ccr=self.acr)
            self.cells_since_frm = 0
            self.last_frm_sent = now
            self.frm_sent += 1
        else:
            if self.greedy and not self.backlog:
                cell = Cell(self, DATA)
            else:
                frame = self.backlog[0]
                frame[0] -= 1
                if frame[0] == 0:
                    self.backlog.popleft()
                    cell = Cell(self, DATA, seg=frame[1])
                else:
                    cell = Cell(self, DATA)
            self.cells_since_frm += 1
        self.last_cell_sent = now
        self.cells_sent += 1
        return cell, now + self._gap

    def _send(self, _=None) -> None:
        now = self.sim.now
        cell, _next = self.next_send(now)
        if self.on_send is not None:
            self.on_send(self, cell, now)
        self.sim.schedule(self.nic.transmit(now), self.fwd_hops[0], cell)
        self._pending = None
        if self.greedy or self.backlog:
            self._arm(now)

    def on_brm(self, brm: Cell) -> None:
        self.brm_received += 1
        self._set_acr(brm.er)
        if self._pending is not None:
            earliest = self.last_cell_sent + self._gap if self._gap > 0 else None
            now = self.sim.now
            if earliest is None:
                self.sim.cancel(self._pending)
                self._pending = None
            else:
                at = earliest if earliest > now else now
                if at != self._next_at:
                    self.sim.cancel(self._pending)
                    self._next_at = at
                    self._pending = self.sim.schedule(at, self._send)
        elif self.has_data() and self._gap > 0:
            # Stalled at zero ACR with data waiting.
            self._arm(self.sim.now)

    def source_receive(self, cell: Cell) -> None:
        """Last backward hop: a BRM back at the source."""
        self.on_brm(cell)

    # -- destination side ----------------------------------------------------

    def dest_receive(self, cell: Cell) -> None:
        """Last forward hop: data or FRM cell at the destination end system."""
        if cell.kind == DATA:
            if cell.seg is not None and self.sink is not None:
                self.sink(cell.seg)
        else:
            brm = dest_turnaround(cell)
            self.sim.schedule(self.dest_nic.transmit(self.sim.now), self.bwd_hops[0], brm)
