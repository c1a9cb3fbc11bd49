"""WWW workload: file-size classes at the server and the batched,
pipelining client with a constant think time."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

from .engine import seconds

REQUEST_BYTES = 256
REQUESTS_PER_BATCH = 5
THINK_TIME = 10.0


@dataclass(frozen=True)
class FileClass:
    weight: Fraction
    sizes: tuple[int, ...]

    @property
    def mean(self) -> float:
        return sum(self.sizes) / len(self.sizes)


def _decade(base: int) -> tuple[int, ...]:
    return tuple(k * base for k in range(1, 10))


FILE_CLASSES: tuple[FileClass, ...] = (
    FileClass(Fraction(200, 1000), _decade(100)),
    FileClass(Fraction(280, 1000), _decade(1_000)),
    FileClass(Fraction(400, 1000), _decade(10_000)),
    FileClass(Fraction(112, 1000), _decade(100_000)),
    FileClass(Fraction(8, 1000), _decade(1_000_000)),
)

# Cumulative weights of classes 1..4 renormalized to the non-index share.
_PIPELINE_TOTAL = sum(c.weight for c in FILE_CLASSES[1:])
_PIPELINE_CDF = tuple(
    float(sum(c.weight for c in FILE_CLASSES[1:i + 1]) / _PIPELINE_TOTAL)
    for i in range(1, len(FILE_CLASSES))
)


def expected_file_size() -> float:
    return float(sum(c.weight * Fraction(sum(c.sizes), len(c.sizes)) for c in FILE_CLASSES))


def sample_class(rng, request_index: int) -> int:
    """Class of the ``request_index``-th request of a batch (1-based)."""
    if request_index == 1:
        return 0
    u = rng.random()
    for cls, edge in enumerate(_PIPELINE_CDF, start=1):
        if u < edge:
            return cls
    return len(FILE_CLASSES) - 1


def sample_file_size(rng, request_index: int) -> int:
    cls = FILE_CLASSES[sample_class(rng, request_index)]
    return cls.sizes[int(rng.random() * len(cls.sizes))]


class Phase(enum.Enum):
    FIRST_REQUEST = "first_request"
    AWAIT_FIRST = "await_first"
    PIPELINE_AWAIT = "pipeline_await"
    THINK = "think"


class WorkloadError(RuntimeError):
    pass


@dataclass
class ClientState:
    phase: Phase = Phase.FIRST_REQUEST
    responses_pending: int = 0
    think_time: float = THINK_TIME
    requests_per_batch: int = REQUESTS_PER_BATCH
    batches_started: int = 0
    batches_completed: int = 0


@dataclass
class ClientActions:
    requests: list[int] = field(default_factory=list)  # batch positions to send now
    timer_at: int | None = None  # ns


def client_step(client: ClientState, event: str, now: int) -> ClientActions:
    """Advance the client FSM on ``start``, ``response_complete`` or ``think_expired``."""
    out = ClientActions()
    if event in ("start", "think_expired"):
        if client.phase not in (Phase.FIRST_REQUEST, Phase.THINK):
            raise WorkloadError(f"{event} while in {client.phase}")
        client.phase = Phase.AWAIT_FIRST
        client.responses_pending = 1
        client.batches_started += 1
        out.requests.append(1)
    elif event == "response_complete":
        if client.responses_pending == 0:
            raise WorkloadError("response completed with none pending")
        client.responses_pending -= 1
        if client.phase is Phase.AWAIT_FIRST:
            rest = client.requests_per_batch - 1
            if rest > 0:
                client.phase = Phase.PIPELINE_AWAIT
                client.responses_pending = rest
                out.requests.extend(range(2, client.requests_per_batch + 1))
        if client.responses_pending == 0 and client.phase is not Phase.THINK:
            client.phase = Phase.THINK
            client.batches_completed += 1
            out.timer_at = now + seconds(client.think_time)
    else:
        raise WorkloadError(f"unknown client event {event!r}")
    return out


def request_message(client=None) -> int:
    """Application bytes carried by one GET."""
    return REQUEST_BYTES


class HttpClient:
    """Drives :func:`client_step` over a TCP endpoint."""

    def __init__(self, sim, endpoint, start_at: int, think_time: float = THINK_TIME):
        self.sim = sim
        self.endpoint = endpoint
        self.state = ClientState(think_time=think_time)
        self.responses_received = 0
        self.response_bytes = 0
        endpoint.on_message = self._on_message
        sim.schedule(start_at, self._event, "start")

    def _event(self, name: str) -> None:
        self._apply(client_step(self.state, name, self.sim.now))

    def _apply(self, actions: ClientActions) -> None:
        for position in actions.requests:
            self.endpoint.write(request_message(self), ("GET", position))
        if actions.timer_at is not None:
            self.sim.schedule(actions.timer_at, self._event, "think_expired")

    def _on_message(self, msg, now: int) -> None:
        kind, position, size = msg
        self.responses_received += 1
        self.response_bytes += size
        self._apply(client_step(self.state, "response_complete", now))


class HttpServer:
    """Infinite server: every complete GET is answered immediately."""

    def __init__(self, rng):
        self.rng = rng
        self.requests_served = 0
        self.bytes_submitted = 0

    def attach(self, endpoint) -> None:
        endpoint.on_message = lambda msg, now, ep=endpoint: self.server_on_request(ep, msg)

    def server_on_request(self, endpoint, request) -> int:
        _, position = request
        size = sample_file_size(self.rng, position)
        self.requests_served += 1
        self.bytes_submitted += size
        endpoint.write(size, ("RESP", position, size))
        return size
