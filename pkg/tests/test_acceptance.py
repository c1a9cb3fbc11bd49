"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line (also repeated in the
terminal summary) and then asserts on the same result.
"""

import pytest

from conftest import report
from wwwabr import acceptance
from wwwabr.acceptance import Check, greedy_convergence
from wwwabr.metrics import format_summary


def _assert(check: Check):
    report(check)
    assert check.passed, check.line()


def test_1_encapsulation():
    _assert(acceptance.check_encapsulation())


def _fixed_point(rates, capacity, iterations=500):
    """Hand-iterated allocation map for one bottleneck held at its target queue."""
    rates = list(rates)
    for _ in range(iterations):
        z = sum(rates) / capacity
        fair = capacity / len(rates)
        rates = [min(max(fair, r / z), capacity) for r in rates]
    return rates


@pytest.mark.parametrize("sources", [2, 5])
def test_2_erica_convergence(sources):
    r = greedy_convergence(sources)
    oracle = _fixed_point([r.fair_rate * (k + 1) / sources for k in range(sources)], r.fair_rate * sources)
    assert oracle == pytest.approx([r.fair_rate] * sources, rel=1e-6)
    within = all(abs(a - f) <= 0.10 * f for a, f in zip(r.acr_at_check + r.acr_at_end, oracle * 2))
    ok = within and r.utilization >= 0.90 and 0 <= r.queue_max_after <= 4 * r.q0
    acrs = ", ".join(f"{a / r.fair_rate:.3f}" for a in r.acr_at_check)
    _assert(Check(f"2 ERICA+ convergence V={sources}", ok,
                  f"ACR/(C/V) at 0.5 s = [{acrs}], utilization={r.utilization:.3f}, "
                  f"max queue after convergence={r.queue_max_after} (4*Q0={4 * r.q0:.0f})"))


def test_3_queue_control_function():
    _assert(acceptance.check_queue_fraction())


def test_4a_workload_sampler():
    _assert(acceptance.check_workload_samples())


@pytest.mark.slow
def test_4b_unconstrained_goodput():
    _assert(acceptance.check_unconstrained_goodput())


def test_5_adtf():
    _assert(acceptance.check_adtf())


@pytest.fixture(scope="module")
def sweep():
    return acceptance.run_sweep(range(1, 16), seed=acceptance.DEFAULT_SEED,
                                duration=acceptance.SWEEP_DURATION)


@pytest.fixture(scope="module")
def sweep_results(sweep):
    print(format_summary(sweep))
    return {c.name.split()[0]: c for c in acceptance.sweep_checks(sweep)}


@pytest.mark.slow
@pytest.mark.parametrize("key", ["6a", "6b", "6c", "6d"])
def test_6_load_sweep_trends(sweep_results, key):
    _assert(sweep_results[key])


@pytest.mark.slow
def test_7_determinism(sweep):
    _assert(acceptance.check_determinism(sweep))
