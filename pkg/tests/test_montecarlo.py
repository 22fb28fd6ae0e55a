import numpy as np
import pytest

from telescopy import MeasurementSettings, Scheme, TauSchedule, Variant, born_distribution, build_povm
from telescopy import build_stellar_state, yields
from telescopy.montecarlo import (
    EstimatorResult,
    analytic_pair_collapse,
    estimate_yields,
    simulate_distillation,
    simulate_scheme,
)
from telescopy.state import CoherenceSet

N = 200_000


def test_estimator_result():
    r = EstimatorResult.from_count(30, 100, 0)
    assert r.mean == 0.3
    assert r.stderr == pytest.approx(np.sqrt(0.3 * 0.7 * 100 / 99 / 100))
    assert r.within(0.3) and not r.within(0.9)


def test_m3_example_schedule():
    sched = TauSchedule((1 / 3, 1 / 2))
    est = simulate_distillation(3, 0.0, None, sched, N, seed=1, source="photon", photon_at=0)
    assert est[(0, 1)].within(1 / 3) and est[(0, 2)].within(1 / 3)
    assert est[(1, 2)].mean == 0.0
    assert est.coincidence.within(2 / 3)


def test_frozen_counts_seed11():
    g, b = estimate_yields(4, TauSchedule((0.3, 0.45, 0.6)), 100_000, seed=11)
    assert round(g.mean * 100_000) == 22523
    assert round(b.mean * 100_000) == 9247


def test_vacuum_input_matches_beta():
    sched = TauSchedule((0.25, 0.5, 0.6))
    est = simulate_distillation(5, 0.0, None, sched, N, seed=2, source="vacuum")
    beta = yields(5, sched).beta_d
    for p, r in est.pairs.items():
        assert r.within(beta), p


def test_hard_vacuum_kills_coherence():
    est = simulate_distillation(4, 0.0, None, TauSchedule((0.999,)), N, seed=3, source="vacuum")
    assert est.coincidence.mean < 1e-4


def test_hard_final_against_enumeration():
    sched = TauSchedule((0.3, 0.5), Variant.HARD_FINAL)
    y = yields(4, sched)
    assert analytic_pair_collapse(4, sched, "photon") == pytest.approx(y.gamma_d, rel=1e-12)
    assert analytic_pair_collapse(4, sched, "vacuum") == pytest.approx(y.beta_d, rel=1e-12)
    g, b = estimate_yields(4, sched, N, seed=4)
    assert g.within(y.gamma_d) and b.within(y.beta_d)


def test_thread_invariance():
    sched = TauSchedule((0.3, 0.6))
    a = simulate_distillation(4, 0.01, CoherenceSet.uniform(4, 0.4), sched, 150_000, seed=5, threads=1)
    b = simulate_distillation(4, 0.01, CoherenceSet.uniform(4, 0.4), sched, 150_000, seed=5, threads=3)
    assert a.pairs == b.pairs and a.failure == b.failure


def test_records():
    est = simulate_distillation(4, 0.0, None, TauSchedule((0.4, 0.5, 0.6)), 1000, seed=6,
                                source="photon", records=50)
    assert len(est.records) == 50
    for r in est.records:
        assert r.round <= 3
        if r.status == "collapsed":
            assert r.pair is not None and 0 in r.pair


@pytest.mark.parametrize("scheme", [Scheme.GJC_CLASSICAL, Scheme.GJC_QUANTUM, Scheme.LOCAL_CLASSICAL,
                                    Scheme.LOCAL_QUANTUM, Scheme.ALL_PAIRS_BIPARTITE])
def test_scheme_sampling(scheme):
    m, eps = 4, 0.05
    g = CoherenceSet.uniform(m, 0.5 + 0.2j)
    sched = TauSchedule((0.4, 0.7))
    y = yields(m, sched)
    settings = (MeasurementSettings(scheme, delta=0.4) if scheme.pair_phased
                else MeasurementSettings(scheme, telescope_deltas=(0.4, 0.0, 0.2, -0.3)))
    emp = simulate_scheme(settings, m, eps, g, sched if scheme.needs_yield else None, N, seed=8)
    ana = born_distribution(build_povm(settings, m, y), build_stellar_state(m, eps, g))
    _, ok = emp.compare(ana)
    assert ok


def test_zero_epsilon_only_uninformative():
    settings = MeasurementSettings(Scheme.GJC_CLASSICAL)
    emp = simulate_scheme(settings, 3, 0.0, CoherenceSet.uniform(3, 0.5), None, 50_000, seed=9)
    informative = [c for lab, c in zip(emp.labels, emp.counts) if getattr(lab, "kind", "") == "pm"]
    assert sum(informative) == 0


def test_rejects_wstate_and_zero_samples():
    with pytest.raises(ValueError):
        simulate_scheme(MeasurementSettings(Scheme.W_STATE), 3, 0.01, 0.5, None, 10)
    with pytest.raises(ValueError):
        simulate_distillation(3, 0.0, None, TauSchedule((0.5,)), 0)


def test_pair_symmetry():
    # exchange-symmetric coherences and a shared schedule: every pair equally likely
    sched = TauSchedule((0.35, 0.55))
    est = simulate_distillation(4, 0.02, CoherenceSet.uniform(4, 0.3), sched, N, seed=12)
    freqs = np.array([r.mean for r in est.pairs.values()])
    se = np.sqrt(freqs.mean() * (1 - freqs.mean()) / N)
    assert np.max(np.abs(freqs - freqs.mean())) < 4 * se * np.sqrt(2)
