import pytest

from wwwabr.abr import OC3_CELL_RATE, AbrVc, SesParams, dest_turnaround
from wwwabr.engine import Simulator, seconds
from wwwabr.erica import EricaPortState
from wwwabr.fabric import BRM, DATA, FRM, Cell


class InstantNic:
    def transmit(self, now):
        return now


def make_vc(params=None, **kw):
    sim = Simulator()
    vc = AbrVc(sim, 0, params or SesParams(), nic=InstantNic(), dest_nic=InstantNic(), **kw)
    sent = []
    vc.fwd_hops = [lambda cell: None]
    vc.on_send = lambda v, cell, now: sent.append((now, cell.kind, v.acr))
    return sim, vc, sent


def test_defaults_follow_access_link():
    p = SesParams()
    assert p.pcr == pytest.approx(366_792.45, abs=0.01)
    assert p.icr == p.pcr / 10
    assert p.mcr == 0 and p.nrm == 32 and p.adtf == 0.5


def test_invalid_rates_rejected():
    with pytest.raises(ValueError):
        SesParams(pcr=100, icr=200)
    with pytest.raises(ValueError):
        SesParams(nrm=1)


def test_exactly_one_frm_per_32_cells():
    sim, vc, sent = make_vc()
    vc.submit(32 * 10, None)
    sim.run_until(seconds(1))
    kinds = [k for _, k, _ in sent]
    # each 32-cell group is one FRM followed by 31 data cells
    assert kinds.count(DATA) == 320
    assert kinds.count(FRM) == -(-320 // 31)
    assert kinds[0] == FRM  # first cell on a VC primes the loop
    for i in range(len(kinds) - 31):
        assert kinds[i:i + 32].count(FRM) == 1


def test_inter_send_gap_at_t3_rate():
    sim, vc, sent = make_vc()
    vc._set_acr(45e6 / 424)
    vc.last_frm_sent = 0
    vc.cells_since_frm = 0
    vc.submit(5, None)
    sim.run_until(seconds(1))
    gaps = {b[0] - a[0] for a, b in zip(sent, sent[1:])}
    assert gaps == {9422}
    assert 9422e-9 == pytest.approx(1 / 106_132, rel=1e-4)


def test_single_data_cell_mid_cycle_sends_no_frm():
    sim, vc, sent = make_vc()
    vc.cells_since_frm = 10
    vc.last_frm_sent = 0
    vc.submit(1, "seg")
    sim.run_until(seconds(1))
    assert [k for _, k, _ in sent] == [DATA]
    assert vc.cells_since_frm == 11


@pytest.mark.parametrize("idle,expect_icr", [(0.6, True), (0.4, False), (0.5, False)])
def test_adtf(idle, expect_icr):
    sim, vc, sent = make_vc()
    vc.last_frm_sent = 0  # FRM went out at t=0
    vc.cells_since_frm = 0
    vc._set_acr(100_000)
    sim.run_until(seconds(idle))
    vc.submit(1, None)
    sim.run_until(sim.now + seconds(0.1))
    assert sent[0][2] == (vc.params.icr if expect_icr else 100_000)


def test_on_brm_sets_acr_within_bounds():
    sim, vc, _ = make_vc()
    vc.on_brm(Cell(vc, BRM, er=50_000))
    assert vc.acr == 50_000
    vc.on_brm(Cell(vc, BRM, er=10 * OC3_CELL_RATE))
    assert vc.acr == vc.params.pcr


def test_zero_er_stalls_until_raised():
    sim, vc, sent = make_vc()
    vc.on_brm(Cell(vc, BRM, er=0.0))
    assert vc.acr == 0
    vc.last_frm_sent = 0
    vc.cells_since_frm = 0
    vc.submit(3, None)
    sim.run_until(seconds(0.1))
    assert sent == []
    vc.on_brm(Cell(vc, BRM, er=10_000))
    sim.run_until(seconds(1))
    assert len(sent) == 3
    assert all(a == 10_000 for _, _, a in sent)


def test_rate_change_reschedules_pending_send():
    sim, vc, sent = make_vc()
    vc._set_acr(1_000)  # 1 ms spacing
    vc.last_frm_sent = 0
    vc.cells_since_frm = 0
    vc.submit(3, None)
    sim.run_until(0)
    assert len(sent) == 1
    vc.on_brm(Cell(vc, BRM, er=100_000))  # 10 us spacing
    sim.run_until(seconds(1e-3) - 1)
    assert len(sent) == 3
    assert sent[1][0] == seconds(1e-5)


def test_pacing_respects_current_acr():
    sim, vc, sent = make_vc()
    vc.submit(2000, None)
    for t, er in [(1e-3, 200_000), (3e-3, 20_000), (6e-3, 300_000)]:
        sim.schedule(seconds(t), lambda _, er=er: vc.on_brm(Cell(vc, BRM, er=er)))
    sim.run_until(seconds(0.02))
    for (t0, _, _), (t1, _, acr1) in zip(sent, sent[1:]):
        assert t1 - t0 >= 1e9 / acr1 - 1
    for _, _, acr in sent:
        assert vc.params.mcr <= acr <= vc.params.pcr


def test_turnaround_copies_rm_fields():
    sim, vc, _ = make_vc()
    frm = Cell(vc, FRM, er=vc.params.pcr, ccr=12_345)
    brm = dest_turnaround(frm)
    assert brm.kind == BRM and brm.vc_id == frm.vc_id
    assert brm.er == frm.er and brm.ccr == frm.ccr


def test_destination_returns_brm_and_delivers_frames():
    sim, vc, _ = make_vc()
    back = []
    frames = []
    vc.bwd_hops = [back.append]
    vc.sink = frames.append
    vc.dest_receive(Cell(vc, DATA))
    vc.dest_receive(Cell(vc, DATA, seg="frame"))
    assert frames == ["frame"] and back == []
    vc.dest_receive(Cell(vc, FRM, er=1.0, ccr=2.0))
    sim.run_until(0)
    assert len(back) == 1 and back[0].kind == BRM


class _FixedAllocation(EricaPortState):
    __slots__ = ()

    def compute_er(self, vc_id):
        return 1_000.0


def test_brm_through_switch_carries_lower_allocation():
    from wwwabr.scenario import ScenarioConfig, build_kn
    topo = build_kn(ScenarioConfig(n_servers=1, k_clients_per_server=1), workload=False)
    vc = topo.connections[0].down
    port = topo.bottleneck
    port.erica = _FixedAllocation(port.erica.params, port.link.cell_rate, port.queue_len)
    vc.greedy = True
    vc.start()
    topo.sim.run_until(seconds(0.2))
    assert vc.brm_received > 0
    assert vc.acr == 1_000.0
