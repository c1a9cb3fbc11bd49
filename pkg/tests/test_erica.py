import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wwwabr.erica import EricaParams, EricaPortState, queue_fraction
from wwwabr.fabric import BRM, DATA, FRM, Cell

C = 45e6 / 424  # bottleneck cell rate
P = EricaParams()
Q0 = P.t0 * C


class _Vc:
    def __init__(self, vc_id):
        self.vc_id = vc_id


def cell(vc_id, kind=DATA, ccr=0.0, er=0.0):
    return Cell(_Vc(vc_id), kind, er=er, ccr=ccr)


def port_state(q=0):
    return EricaPortState(P, C, lambda now: q)


def test_default_parameters():
    assert (P.interval_cells, P.interval_time, P.t0, P.a, P.b, P.qdlf) == (500, 5e-3, 500e-6, 1.15, 1.05, 0.5)


@pytest.mark.parametrize("kw", [{"a": 0.9}, {"b": 1.0}, {"qdlf": 0.0}, {"qdlf": 1.5}, {"t0": 0.0}])
def test_invalid_parameters(kw):
    with pytest.raises(ValueError):
        EricaParams(**kw)


def test_queue_fraction_examples():
    assert queue_fraction(0, P, Q0) == 1.15
    assert queue_fraction(Q0, P, Q0) == 1.0
    # b*q0 / ((b-1)*2q0 + q0) = 1.05 / 1.10
    assert queue_fraction(2 * Q0, P, Q0) == pytest.approx(1.05 / 1.10)
    assert queue_fraction(2 * Q0, P, Q0) == pytest.approx(0.9545, abs=1e-4)
    assert queue_fraction(1e6 * Q0, P, Q0) == 0.5


def test_target_queue_is_at_least_one_cell():
    assert EricaPortState(P, 100.0).q0 == 1.0
    assert port_state().q0 == pytest.approx(53.07, abs=0.01)


@settings(max_examples=300)
@given(st.floats(min_value=0, max_value=1e7), st.floats(min_value=0, max_value=1e7))
def test_queue_fraction_monotone_and_bounded(q1, q2):
    lo, hi = sorted((q1, q2))
    f_lo, f_hi = queue_fraction(lo, P, Q0), queue_fraction(hi, P, Q0)
    assert f_hi <= f_lo
    assert P.qdlf <= f_hi <= P.a


@given(st.floats(min_value=1e-3, max_value=1e-3 * Q0))
def test_queue_fraction_continuous_at_target(eps):
    assert queue_fraction(Q0 - eps, P, Q0) == pytest.approx(queue_fraction(Q0 + eps, P, Q0), abs=1e-3)


def test_interval_ends_on_cell_count():
    e = port_state()
    for i in range(499):
        e.on_cell_arrival(cell(1), i * 6_000)
    assert e.intervals == 0
    e.on_cell_arrival(cell(1), 3_000_000)
    assert e.intervals == 1 and e.cells_received == 0


def test_interval_ends_on_timer():
    e = port_state()
    for i in range(119):
        e.on_cell_arrival(cell(1), i * 40_000)
    assert e.intervals == 0
    e.on_cell_arrival(cell(1), 5_000_000)
    assert e.intervals == 1
    assert e.z == pytest.approx(120 / 5e-3 / (1.15 * C))


def test_frm_records_ccr():
    e = port_state()
    e.on_cell_arrival(cell(4, FRM, ccr=42_000), 0)
    assert e.vc_ccr[4] == 42_000


def test_backward_rm_cells_do_not_count_as_active_sources():
    e = port_state()
    e.on_cell_arrival(cell(1), 0)
    e.on_cell_arrival(cell(2, BRM), 0)
    assert e.active_vcs == {1}
    assert e.cells_received == 2


def _run_interval(e, rates, start, length=4e-3):
    """Feed an interval of cells at the given per-VC rates (cells/s), CCR in FRMs."""
    events = []
    for vc, r in rates.items():
        n = max(1, int(r * length))
        for k in range(n):
            events.append((start + int(k * 1e9 / r), vc, r, k == 0))
    events.sort()
    e.cells_received = 0
    e.active_vcs = set()
    e.last_interval_end = start
    e._interval_cells = 10**9  # measurement by time only
    for t, vc, r, first in events:
        e.cells_received += 1
        e.active_vcs.add(vc)
        if first:
            e.vc_ccr[vc] = r
    e.end_interval(start + int(length * 1e9))


def test_end_interval_at_capacity_single_vc():
    e = port_state(q=Q0)  # f = 1: target capacity equals link rate
    e.cells_received = 500
    e.active_vcs = {1}
    e.end_interval(int(500 / C * 1e9))
    assert e.z == pytest.approx(1.0, rel=1e-4)
    assert e.fair_share == pytest.approx(C)


def test_end_interval_double_load():
    e = port_state(q=Q0)
    e.cells_received = 1000
    e.active_vcs = {1, 2}
    e.end_interval(int(500 / C * 1e9))
    assert e.z == pytest.approx(2.0, rel=1e-4)


def test_empty_interval_keeps_overload_and_fair_share():
    q = [Q0]
    e = EricaPortState(P, C, lambda now: q[0])
    e.cells_received = 100
    e.active_vcs = {1, 2}
    e.end_interval(1_000_000)
    z, fs = e.z, e.fair_share
    q[0] = 0
    e.end_interval(7_000_000)
    assert (e.z, e.fair_share) == (z, fs)
    assert e.target_abr_capacity == pytest.approx(1.15 * C)


def test_compute_er_underload_is_capped():
    e = port_state()
    e.z = 0.5
    e.fair_share = e.target_abr_capacity
    e.vc_ccr[1] = 0.4 * C
    assert e.compute_er(1) == e.target_abr_capacity


def test_compute_er_plugged_values():
    e = port_state()
    cap = e.target_abr_capacity
    e.z = 2.0
    e.fair_share = cap / 5
    e.vc_ccr[1] = 0.4 * cap
    assert e.compute_er(1) == pytest.approx(0.2 * cap)


def test_compute_er_without_ccr_uses_fair_share():
    e = port_state()
    e.z = 1.5
    e.fair_share = 1234.0
    assert e.compute_er(99) == 1234.0


def _fixed_point_oracle(rates, capacity, iterations=200):
    """Hand-iterated allocation map for one port with q held at the target queue."""
    rates = list(rates)
    for _ in range(iterations):
        z = sum(rates) / capacity
        fair = capacity / len(rates)
        rates = [min(max(fair, r / z), capacity) for r in rates]
    return rates


def test_two_vcs_converge_to_equal_split():
    oracle = _fixed_point_oracle([0.1 * C, 0.9 * C], C)
    assert oracle == pytest.approx([C / 2, C / 2], rel=1e-6)

    e = port_state(q=Q0)
    rates = {1: 0.1 * C, 2: 0.9 * C}
    t = 0
    for _ in range(60):
        _run_interval(e, rates, t)
        t += 4_000_000
        rates = {vc: e.compute_er(vc) for vc in rates}
    for r in rates.values():
        assert r == pytest.approx(C / 2, rel=0.02)


def test_stamp_never_raises_er():
    e = port_state()
    e.z = 1.0
    e.fair_share = 0.3 * 366_792
    e.target_abr_capacity = 10 * C
    e.last_interval_end = 0
    brm = cell(1, BRM, er=366_792)
    e.stamp_brm(brm, 0)
    assert brm.er == pytest.approx(0.3 * 366_792)
    low = cell(1, BRM, er=10.0)
    e.stamp_brm(low, 0)
    assert low.er == 10.0


def test_two_switches_give_minimum_allocation():
    a, b = port_state(), port_state()
    for e, share in ((a, 30_000.0), (b, 20_000.0)):
        e.z = 1.0
        e.fair_share = share
    brm = cell(1, BRM, er=366_792)
    a.stamp_brm(brm, 0)
    b.stamp_brm(brm, 0)
    assert brm.er == 20_000.0


def test_stamp_closes_expired_interval():
    e = port_state()
    e.on_cell_arrival(cell(1), 0)
    brm = cell(1, BRM, er=1e9)
    e.stamp_brm(brm, 6_000_000)
    assert e.intervals == 1
