"""Acceptance scenarios shared by ``wwwabr selftest`` and the test suite.

Each check returns a :class:`Check`; nothing here asserts, so callers decide
how to report.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .abr import AbrVc, SesParams
from .engine import Simulator, seconds
from .erica import EricaParams, queue_fraction
from .fabric import CELL_BITS, CELL_BYTES
from .metrics import RTT_CELLS, RunMetrics, format_summary, run_scenario
from .scenario import ScenarioConfig, build_kn
from .tcp import cells_for_frame
from .workload import FILE_CLASSES, REQUESTS_PER_BATCH, sample_class

DEFAULT_SEED = 1
SWEEP_DURATION = 30.0


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# -- 1. encapsulation ---------------------------------------------------------

def check_encapsulation() -> Check:
    raw = 512 / (cells_for_frame(512) * CELL_BYTES)
    abr = 31 / 32 * round(raw, 3)
    ok = (cells_for_frame(512) == 12 and cells_for_frame(0) == 2
          and round(raw, 3) == 0.805 and round(abr, 3) == 0.780)
    return Check("1 encapsulation", ok,
                 f"cells(512)={cells_for_frame(512)} cells(0)={cells_for_frame(0)} "
                 f"raw={raw:.5f} abr={abr:.5f}")


# -- 2. ERICA+ convergence ----------------------------------------------------

@dataclass
class ConvergenceResult:
    sources: int
    fair_rate: float
    acr_at_check: list[float]
    acr_at_end: list[float]
    utilization: float
    queue_max_after: int
    q0: float


def greedy_convergence(sources: int, check_at: float = 0.5, end: float = 1.0) -> ConvergenceResult:
    """``sources`` infinite-demand VCs from one server through the bottleneck."""
    config = ScenarioConfig(n_servers=1, k_clients_per_server=sources)
    topo = build_kn(config, workload=False)
    sim = topo.sim
    vcs = [c.down for c in topo.connections]
    for vc in vcs:
        vc.greedy = True
        vc.start()
    sim.run_until(seconds(check_at))
    acr_check = [vc.acr for vc in vcs]
    port = topo.bottleneck
    out_before = port.cells_out(sim.now)
    peak = [port.queue_len(sim.now)]

    def track(_port, _now, qlen):
        if qlen > peak[0]:
            peak[0] = qlen

    port.on_queue = track
    sim.run_until(seconds(end))
    qmax = peak[0]
    out_cells = port.cells_out(sim.now) - out_before
    capacity_cells = port.link.cell_rate * (end - check_at)
    return ConvergenceResult(
        sources=sources,
        fair_rate=port.link.cell_rate / sources,
        acr_at_check=acr_check,
        acr_at_end=[vc.acr for vc in vcs],
        utilization=out_cells / capacity_cells,
        queue_max_after=qmax,
        q0=port.erica.q0,
    )


def check_convergence(sources: int) -> Check:
    r = greedy_convergence(sources)
    within = all(abs(a - r.fair_rate) <= 0.10 * r.fair_rate for a in r.acr_at_check + r.acr_at_end)
    ok = within and r.utilization >= 0.90 and 0 <= r.queue_max_after <= 4 * r.q0
    acrs = ", ".join(f"{a / r.fair_rate:.3f}" for a in r.acr_at_check)
    return Check(f"2 ERICA+ convergence V={sources}", ok,
                 f"ACR/(C/V) at 0.5 s = [{acrs}], utilization={r.utilization:.3f}, "
                 f"max queue after convergence={r.queue_max_after} (4*Q0={4 * r.q0:.0f})")


# -- 3. queue control function --------------------------------------------------

def check_queue_fraction(points: int = 10_000, seed: int = DEFAULT_SEED) -> Check:
    p = EricaParams()
    q0 = p.t0 * 45e6 / CELL_BITS
    rng = random.Random(seed)
    qs = sorted(rng.uniform(0, 200 * q0) for _ in range(points))
    vals = [queue_fraction(q, p, q0) for q in qs]
    monotone = all(b <= a for a, b in zip(vals, vals[1:]))
    ok = (queue_fraction(0, p, q0) == 1.15 and queue_fraction(q0, p, q0) == 1.0
          and monotone and queue_fraction(1e6 * q0, p, q0) == 0.5
          and all(p.qdlf <= v <= p.a for v in vals))
    return Check("3 queue control function", ok,
                 f"f(0)={queue_fraction(0, p, q0)} f(Q0)={queue_fraction(q0, p, q0)} "
                 f"monotone={monotone} f(1e6*Q0)={queue_fraction(1e6 * q0, p, q0)}")


# -- 4. workload calibration -----------------------------------------------------

def workload_statistics(samples: int = 1_000_000, seed: int = DEFAULT_SEED):
    rng = random.Random(f"{seed}/calibration")
    counts = [0] * len(FILE_CLASSES)
    total = 0
    for i in range(samples):
        position = i % REQUESTS_PER_BATCH + 1
        cls = sample_class(rng, position)
        counts[cls] += 1
        sizes = FILE_CLASSES[cls].sizes
        total += sizes[int(rng.random() * len(sizes))]
    return [c / samples for c in counts], total / samples


def check_workload_samples() -> Check:
    freqs, mean = workload_statistics()
    expected = [float(c.weight) for c in FILE_CLASSES]
    ok = all(abs(f - e) <= 0.01 for f, e in zip(freqs, expected)) and abs(mean / 117_500 - 1) <= 0.05
    return Check("4a workload sampler", ok,
                 "freqs=[" + ", ".join(f"{f:.4f}" for f in freqs) + f"] mean={mean:.0f} B")


def check_unconstrained_goodput(seed: int = DEFAULT_SEED) -> Check:
    config = ScenarioConfig(n_servers=1, bottleneck_rate=622e6, sim_duration=60.0, seed=seed)
    m, _ = run_scenario(config)
    per_client = m.total_tcp_throughput / config.k_clients_per_server
    ok = abs(per_client / 0.48 - 1) <= 0.20
    return Check("4b unconstrained per-client goodput", ok, f"{per_client:.3f} Mbps (0.48 +/- 20%)")


# -- 5. ADTF ---------------------------------------------------------------------

def adtf_after_idle(idle: float, acr: float = 100_000.0) -> tuple[float, float]:
    """Return (acr used by the first post-idle cell, icr)."""
    sim = Simulator()
    params = SesParams()

    class _Nic:
        def transmit(self, now):
            return now

    vc = AbrVc(sim, 0, params, nic=_Nic())
    vc.fwd_hops = [lambda cell: None]
    seen = []
    vc.on_send = lambda v, cell, now: seen.append(v.acr)
    vc.submit(1, None)
    sim.run_until(0)
    vc._set_acr(acr)
    sim.run_until(seconds(idle))
    seen.clear()
    vc.submit(1, None)
    sim.run_until(sim.now + seconds(1.0))
    return seen[0], params.icr


def check_adtf() -> Check:
    after_long, icr = adtf_after_idle(0.6)
    after_short, _ = adtf_after_idle(0.4)
    ok = after_long == icr and after_short == 100_000.0
    return Check("5 ADTF", ok, f"idle 600 ms -> ACR {after_long:.0f} (ICR {icr:.0f}); "
                               f"idle 400 ms -> ACR {after_short:.0f}")


# -- 6/7. sweep -----------------------------------------------------------------

def run_sweep(n_list=range(1, 16), seed: int = DEFAULT_SEED, duration: float = SWEEP_DURATION,
              base: ScenarioConfig | None = None, jobs: int = 1) -> list[RunMetrics]:
    base = base or ScenarioConfig()
    configs = [base.replace(n_servers=n, seed=seed, sim_duration=duration) for n in n_list]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, configs))
    return [_run_one(c) for c in configs]


def _run_one(config: ScenarioConfig) -> RunMetrics:
    return run_scenario(config)[0]


def sweep_checks(rows: list[RunMetrics]) -> list[Check]:
    by_n = {m.n_servers: m for m in rows}
    checks = []
    low = [n for n in by_n if n <= 4]
    detail = []
    ok = True
    for n in sorted(low):
        pred = n * 7.2 / 35.1
        eff = by_n[n].efficiency
        detail.append(f"N={n}: {100 * eff:.1f}% vs {100 * pred:.1f}%")
        ok &= abs(eff - pred) <= 0.15
    checks.append(Check("6a light-load efficiency is linear (+/-15 pts)", ok, "; ".join(detail)))

    high = [by_n[n] for n in sorted(by_n) if 5 <= n <= 15]
    checks.append(Check("6b overload efficiency >= 85%", all(m.efficiency >= 0.85 for m in high),
                        ", ".join(f"N={m.n_servers}:{100 * m.efficiency:.1f}%" for m in high)))

    bound = 3 * RTT_CELLS
    checks.append(Check("6c max queue <= 3 x RTT cells", all(m.max_queue_cells <= bound for m in rows),
                        f"max={max(m.max_queue_cells for m in rows)} bound={bound}"))

    if 5 in by_n and any(6 <= n <= 15 for n in by_n):
        ref = by_n[5].max_queue_cells
        peak = max(by_n[n].max_queue_cells for n in by_n if 6 <= n <= 15)
        checks.append(Check("6d max queue stabilizes", 0.5 * ref <= peak <= 2.5 * ref,
                            f"max(N=6..15)={peak}, N=5={ref}, ratio={peak / ref:.2f}"))
    return checks


def check_determinism(first: list[RunMetrics], seed: int = DEFAULT_SEED) -> Check:
    second = run_sweep([m.n_servers for m in first], seed=seed)
    a, b = format_summary(first), format_summary(second)
    return Check("7 determinism", a == b, "identical CSV" if a == b else "CSV differs")


def run_all(include_sweep: bool = True) -> list[Check]:
    checks = [
        check_encapsulation(),
        check_convergence(2),
        check_convergence(5),
        check_queue_fraction(),
        check_workload_samples(),
        check_unconstrained_goodput(),
        check_adtf(),
    ]
    if include_sweep:
        rows = run_sweep()
        checks.extend(sweep_checks(rows))
        checks.append(check_determinism(rows))
    return checks


__all__ = [
    "Check", "DEFAULT_SEED", "adtf_after_idle", "check_adtf", "check_convergence",
    "check_determinism", "check_encapsulation", "check_queue_fraction",
    "check_unconstrained_goodput", "check_workload_samples", "greedy_convergence",
    "run_all", "run_sweep", "sweep_checks", "workload_statistics",
]
