"""Run measurement (bottleneck queue, delivered TCP payload, efficiency),
the scenario runner and CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .engine import NS_PER_S, Simulator, seconds
from .scenario import ScenarioConfig, Topology, build_kn

RTT_CELLS = 11040
# Fraction of ABR capacity left for TCP payload: 512 / (12 * 53) * 31/32.
TCP_CEILING = 0.78
SUMMARY_HEADER = ("n_servers", "max_queue_cells", "max_queue_rtt", "throughput_mbps", "efficiency_pct")


def compute_efficiency(throughput_mbps: float, bottleneck_mbps: float) -> float:
    if bottleneck_mbps <= 0:
        raise ValueError("bottleneck rate must be positive")
    return throughput_mbps / (TCP_CEILING * bottleneck_mbps)


def queue_in_rtts(cells: float) -> float:
    return cells / RTT_CELLS


class QueueRecorder:
    """Exact running maximum from the enqueue hook plus an optional periodic sample."""

    def __init__(self, sim: Simulator | None = None, port=None, period: float = 0.0, until: float = 0.0):
        self.max_cells = 0
        self.samples: list[tuple[int, int]] = []
        self._port = port
        self._sim = sim
        self._period = seconds(period) if period > 0 else 0
        self._until = seconds(until)
        if sim is not None and port is not None:
            port.on_queue = self.record_queue
            if self._period:
                sim.schedule(0, self._sample)

    def record_queue(self, port, now: int, len_cells: int) -> None:
        if len_cells > self.max_cells:
            self.max_cells = len_cells

    def _sample(self, _=None) -> None:
        now = self._sim.now
        self.samples.append((now, self._port.queue_len(now)))
        nxt = now + self._period
        if nxt <= self._until:
            self._sim.schedule(nxt, self._sample)

    @property
    def sampled_max(self) -> int:
        return max((q for _, q in self.samples), default=0)


class ThroughputMeter:
    """Server-to-client application bytes delivered inside ``[start, end]``."""

    def __init__(self, start: int, end: int, n_connections: int):
        self.start = start
        self.end = end
        self.per_connection = [0] * n_connections
        self.total = 0

    def hook(self, index: int):
        def on_bytes(nbytes: int, now: int) -> None:
            if self.start <= now <= self.end:
                self.per_connection[index] += nbytes
                self.total += nbytes
        return on_bytes

    def mbps(self) -> float:
        return self.total * 8 / ((self.end - self.start) / NS_PER_S) / 1e6


@dataclass
class RunMetrics:
    n_servers: int
    bottleneck_mbps: float
    max_queue_cells: int
    delivered_app_bytes: list[int]
    window_s: float
    total_tcp_throughput: float  # Mbps
    efficiency: float
    queue_timeseries: list[tuple[int, int]] = field(default_factory=list)
    events: int = 0
    spurious_timeouts: int = 0
    batches_completed: int = 0

    @property
    def max_queue_rtt(self) -> float:
        return queue_in_rtts(self.max_queue_cells)

    def summary_row(self) -> tuple[str, ...]:
        return (
            str(self.n_servers),
            str(self.max_queue_cells),
            f"{self.max_queue_rtt:.2f}",
            f"{self.total_tcp_throughput:.2f}",
            f"{100 * self.efficiency:.1f}",
        )


def run_scenario(config: ScenarioConfig, queue_sample_period: float = 0.0,
                 erica_trace: bool = False) -> tuple[RunMetrics, Topology]:
    topo = build_kn(config)
    sim = topo.sim
    end = seconds(config.sim_duration)
    recorder = QueueRecorder(sim, topo.bottleneck, queue_sample_period, config.sim_duration)
    meter = ThroughputMeter(seconds(config.warmup), end, len(topo.connections))
    for i, conn in enumerate(topo.connections):
        conn.client_ep.on_bytes = meter.hook(i)
    if erica_trace:
        for port in topo.ports:
            port.erica.trace = []
    sim.run_until(end)
    thr = meter.mbps()
    metrics = RunMetrics(
        n_servers=config.n_servers,
        bottleneck_mbps=config.bottleneck_rate / 1e6,
        max_queue_cells=recorder.max_cells,
        delivered_app_bytes=list(meter.per_connection),
        window_s=(meter.end - meter.start) / NS_PER_S,
        total_tcp_throughput=thr,
        efficiency=compute_efficiency(thr, config.bottleneck_rate / 1e6),
        queue_timeseries=recorder.samples,
        events=sim.dispatched,
        spurious_timeouts=sum(c.server_ep.spurious_timeouts + c.client_ep.spurious_timeouts
                              for c in topo.connections),
        batches_completed=sum(c.http_client.state.batches_completed for c in topo.connections),
    )
    return metrics, topo


def format_summary(rows: list[RunMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for m in rows:
        writer.writerow(m.summary_row())
    return buf.getvalue()


def write_csv(metrics: RunMetrics | list[RunMetrics], path) -> None:
    rows = metrics if isinstance(metrics, list) else [metrics]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_summary(rows))


def write_queue_csv(metrics: RunMetrics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("time_s", "queue_cells"))
        for t, q in metrics.queue_timeseries:
            writer.writerow((f"{t / NS_PER_S:.6f}", q))


def write_erica_csv(topo: Topology, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("time_s", "port", "q", "z", "fair_share", "target_capacity"))
        for port in topo.ports:
            for t, q, z, fs, cap in port.erica.trace or ():
                writer.writerow((f"{t / NS_PER_S:.6f}", port.name, q,
                                 "" if z is None else f"{z:.6f}", f"{fs:.2f}", f"{cap:.2f}"))
