"""Loss-free TCP over AAL5: segmentation, cumulative ACKs, slow start and
congestion avoidance, coarse-grained RTO estimation and slow-start restart."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .engine import NS_PER_S
from .fabric import CELL_PAYLOAD

HEADER_BYTES = 56  # TCP 20 + IP 20 + LLC/SNAP 8 + AAL5 8


class TcpModelError(RuntimeError):
    """The no-loss, no-reorder assumptions of the model were violated."""


@dataclass(frozen=True)
class TcpParams:
    mss: int = 512
    overhead: int = HEADER_BYTES
    max_window: int = 16 * 65536
    timer_granularity: float = 0.1  # seconds
    idle_restart_enabled: bool = True
    initial_ssthresh: int = 65536
    initial_rto: float = 3.0
    strict_rto: bool = False

    def __post_init__(self) -> None:
        if self.mss < 1:
            raise ValueError("tcp.mss must be positive")
        if self.max_window < self.mss:
            raise ValueError("tcp.max_window must be at least one mss")
        if self.overhead != HEADER_BYTES:
            raise ValueError(f"tcp.overhead is fixed at {HEADER_BYTES}")
        if not self.timer_granularity > 0:
            raise ValueError("tcp.timer_granularity must be positive")


def cells_for_frame(payload_bytes: int, overhead: int = HEADER_BYTES) -> int:
    return -(-(payload_bytes + overhead) // CELL_PAYLOAD)


class Segment:
    __slots__ = ("seq", "length", "ack")

    def __init__(self, seq: int = 0, length: int = 0, ack: int | None = None):
        self.seq = seq
        self.length = length
        self.ack = ack

    def __repr__(self) -> str:
        if self.length:
            return f"Segment([{self.seq},{self.seq + self.length}))"
        return f"Ack({self.ack})"


class RttEstimator:
    """Smoothed RTT with gains 1/8 and 1/4; RTO rounded up to the timer tick."""

    def __init__(self, granularity: float, initial_rto: float = 3.0):
        self.granularity = granularity
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = self._quantize(initial_rto)

    def _quantize(self, value: float) -> float:
        g = self.granularity
        ticks = math.ceil(value / g - 1e-9)
        return max(1, ticks) * g

    def update(self, sample: float) -> float:
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.rto = self._quantize(self.srtt + 4 * self.rttvar)
        return self.rto


class MessageStream:
    """Message boundaries of one direction of a connection.

    The writer records the byte offset where each application message ends;
    the reader hands a message up once all of its bytes are in.
    """

    __slots__ = ("written", "marks")

    def __init__(self) -> None:
        self.written = 0
        self.marks: deque = deque()

    def write(self, nbytes: int, msg) -> None:
        self.written += nbytes
        self.marks.append((self.written, msg))


class TcpEndpoint:
    """One end of a persistent connection: a sender on ``out_vc`` and a
    receiver fed from the peer's VC through :meth:`receive`.

    ``on_message(msg, now)`` is called for each complete inbound message and
    ``on_bytes(n, now)`` for each in-order data arrival.
    """

    def __init__(self, sim, params: TcpParams, out_vc, outbound: MessageStream,
                 inbound: MessageStream, name: str = ""):
        self.sim = sim
        self.params = params
        self.name = name
        self.out_vc = out_vc
        self.outbound = outbound
        self.inbound = inbound
        self.cwnd = float(params.mss)
        self.ssthresh = float(params.initial_ssthresh)
        self.rwnd = params.max_window
        self.snd_una = 0
        self.snd_nxt = 0
        self.rcv_nxt = 0
        self.estimator = RttEstimator(params.timer_granularity, params.initial_rto)
        self.last_send_time: int | None = None
        self._timing: deque = deque()
        self._rto_deadline: int | None = None
        self._rto_event: int | None = None
        self.on_message = None
        self.on_bytes = None
        self.segments_sent = 0
        self.acks_sent = 0
        self.idle_restarts = 0
        self.spurious_timeouts = 0
        self.max_outstanding_ratio = 0.0
        self._ack_cells = cells_for_frame(0, params.overhead)

    @property
    def rto(self) -> float:
        return self.estimator.rto

    @property
    def send_buffer(self) -> int:
        return self.outbound.written - self.snd_nxt

    @property
    def outstanding(self) -> int:
        return self.snd_nxt - self.snd_una

    # -- application interface -----------------------------------------------

    def write(self, nbytes: int, msg) -> None:
        now = self.sim.now
        if self.outbound.written == self.snd_nxt and self.snd_una == self.snd_nxt:
            self.idle_restart(now)
        self.outbound.write(nbytes, msg)
        self.segmentize_and_send(now)

    # -- sender --------------------------------------------------------------

    def idle_restart(self, now: int) -> None:
        p = self.params
        if not p.idle_restart_enabled or self.last_send_time is None:
            return
        if (now - self.last_send_time) > self.estimator.rto * NS_PER_S:
            before = self.cwnd
            self.cwnd = float(p.mss)
            self.ssthresh = max(before / 2, 2.0 * p.mss)
            self.idle_restarts += 1

    def segmentize_and_send(self, now: int) -> int:
        p = self.params
        mss = p.mss
        sent = 0
        window = int(min(self.cwnd, self.rwnd))
        while True:
            pending = self.outbound.written - self.snd_nxt
            if pending <= 0:
                break
            seglen = mss if pending > mss else pending
            if self.snd_nxt - self.snd_una + seglen > window:
                break
            seg = Segment(self.snd_nxt, seglen)
            self.out_vc.submit(cells_for_frame(seglen, p.overhead), seg)
            self._timing.append((self.snd_nxt + seglen, now))
            self.snd_nxt += seglen
            sent += 1
        if sent:
            self.segments_sent += sent
            self.last_send_time = now
            ratio = (self.snd_nxt - self.snd_una) / window
            if ratio > self.max_outstanding_ratio:
                self.max_outstanding_ratio = ratio
            if self._rto_deadline is None:
                self._arm_rto(now)
        return sent

    def on_ack(self, ack_seq: int, now: int) -> None:
        if ack_seq > self.snd_nxt:
            raise TcpModelError(f"{self.name}: ack {ack_seq} beyond snd_nxt {self.snd_nxt}")
        if ack_seq <= self.snd_una:
            return
        self.snd_una = ack_seq
        p = self.params
        if self.cwnd < self.ssthresh:
            self.cwnd += p.mss
        else:
            self.cwnd += p.mss * p.mss / self.cwnd
        if self.cwnd > p.max_window:
            self.cwnd = float(p.max_window)
        timing = self._timing
        sent_at = None
        while timing and timing[0][0] <= ack_seq:
            sent_at = timing.popleft()[1]
        if sent_at is not None:
            self.estimator.update((now - sent_at) / NS_PER_S)
        if self.snd_una == self.snd_nxt:
            self._rto_deadline = None
        else:
            self._arm_rto(now)
        self.segmentize_and_send(now)

    def _arm_rto(self, now: int) -> None:
        self._rto_deadline = now + int(self.estimator.rto * NS_PER_S + 0.5)
        if self._rto_event is None:
            self._rto_event = self.sim.schedule(self._rto_deadline, self._rto_fire)

    def _rto_fire(self, _=None) -> None:
        self._rto_event = None
        deadline = self._rto_deadline
        if deadline is None:
            return
        now = self.sim.now
        if deadline > now:
            self._rto_event = self.sim.schedule(deadline, self._rto_fire)
            return
        # Nothing is ever lost, so an expiry means the segment is still queued.
        if self.params.strict_rto:
            raise TcpModelError(f"{self.name}: retransmission timer fired at {now} ns")
        self.spurious_timeouts += 1
        self._arm_rto(now)

    # -- receiver ------------------------------------------------------------

    def receive(self, seg: Segment) -> None:
        now = self.sim.now
        if seg.length:
            self.receiver_on_segment(seg.seq, seg.length, now)
        if seg.ack is not None:
            self.on_ack(seg.ack, now)

    def receiver_on_segment(self, seq: int, length: int, now: int) -> None:
        if seq != self.rcv_nxt:
            raise TcpModelError(f"{self.name}: out-of-order segment at {seq}, expected {self.rcv_nxt}")
        self.rcv_nxt += length
        self.acks_sent += 1
        self.out_vc.submit(self._ack_cells, Segment(ack=self.rcv_nxt))
        if self.on_bytes is not None:
            self.on_bytes(length, now)
        marks = self.inbound.marks
        while marks and marks[0][0] <= self.rcv_nxt:
            msg = marks.popleft()[1]
            if self.on_message is not None:
                self.on_message(msg, now)
