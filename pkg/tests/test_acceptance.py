"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N [PASS|FAIL]`` line (also collected in the
terminal summary) and then asserts. Nothing is loosened to make a line pass.
"""

import time
from math import comb

import numpy as np

import oracles
from telescopy import (
    MeasurementSettings,
    Scheme,
    TauSchedule,
    Variant,
    ansatz_schedule,
    born_distribution,
    build_povm,
    build_stellar_state,
    closed_form_m3,
    fisher_closed_form,
    fisher_numeric,
    optimize_gamma,
    scheme_ratio,
    yields,
)
from telescopy import fisher as fz
from telescopy.distillation import local_single_round_optimum, regime_holds
from telescopy.kraus import completeness_residual
from telescopy.montecarlo import estimate_yields, simulate_distillation, simulate_scheme
from telescopy.state import CoherenceSet
from telescopy.validation import random_coherence

POVM_SCHEMES = (Scheme.GJC_CLASSICAL, Scheme.GJC_QUANTUM, Scheme.LOCAL_CLASSICAL,
                Scheme.LOCAL_QUANTUM, Scheme.ALL_PAIRS_BIPARTITE)
ALL_SCHEMES = POVM_SCHEMES + (Scheme.W_STATE, Scheme.MULTIPARTITE_FRAME)


def _settings(rng, scheme, m):
    if scheme.pair_phased:
        return MeasurementSettings(scheme, delta=float(rng.uniform(-np.pi, np.pi)))
    return MeasurementSettings(scheme, telescope_deltas=rng.uniform(-np.pi, np.pi, size=m))


def test_criterion_1_m3_closed_forms(criterion):
    t0 = time.perf_counter()
    dev_ansatz = max(abs(yields(3, ansatz_schedule(d)).gamma_d - d / (2 * (1 + d))) for d in range(1, 21))
    dev_opt, dev_tau = 0.0, 0.0
    for d in range(1, 11):
        rep = optimize_gamma(3, d, Variant.HARD_FINAL)
        dev_opt = max(dev_opt, abs(rep.gamma_d - (d + 1) / (2 * (d + 2))))
        taus = rep.schedule.taus
        # tau_{D-1} and tau_{D-2} are the last two weak rounds
        if d >= 2:
            dev_tau = max(dev_tau, abs(taus[-1] - 0.25))
        if d >= 3:
            dev_tau = max(dev_tau, abs(taus[-2] - 0.2))
    assert closed_form_m3(4, Variant.HARD_FINAL) == 5 / 12
    ok = dev_ansatz <= 1e-12 and dev_opt <= 1e-8 and dev_tau <= 1e-5
    criterion(1, "M=3 closed forms", ok,
              f"ansatz dev {dev_ansatz:.1e} (tol 1e-12), hard-final optimum dev {dev_opt:.1e} (tol 1e-8), "
              f"tau dev {dev_tau:.1e} (tol 1e-5), {time.perf_counter() - t0:.1f}s")
    assert ok


def test_criterion_2_quantum_vs_classical_gain(criterion):
    t0 = time.perf_counter()
    eps, g = 0.01, CoherenceSet.uniform
    rows, ok = [], True
    for m in range(3, 9):
        y = optimize_gamma(m, 70).yields
        q = fz.fisher_gjc_quantum(m, eps, g(m, 0.5), 0.0, gamma_d=y.gamma_d)
        c = fz.fisher_gjc_classical(m, eps, g(m, 0.5), 0.0)
        r = scheme_ratio(q, c).ratio
        frac = r / (m / 2)
        ok &= frac >= 0.98
        rows.append(f"M={m}: {r:.4f} ({frac:.4f} of M/2)")
    r8 = float(rows[-1].split()[1])
    ok_8 = abs(r8 - 4.0) <= 0.02 * 4.0
    ok = bool(ok and ok_8)
    criterion(2, "ratio >= 0.98 M/2 at D=70", ok,
              "; ".join(rows) + f"; M=8 within 2% of 4: {ok_8}; {time.perf_counter() - t0:.1f}s")
    assert ok


def test_criterion_3_single_round_m8(criterion):
    t0 = time.perf_counter()
    target = 28 * (1 / 7) * (6 / 7) ** 6
    rep = optimize_gamma(8, 1)
    val = comb(8, 2) * rep.gamma_d
    _, grid = oracles.single_round_max(8)
    ok = abs(val - target) <= 1e-6 and val > 1.0 and abs(comb(8, 2) * grid - target) < 1e-9
    criterion(3, "single-round M=8 maximum", ok,
              f"28 gamma_1 = {val:.12f}, target {target:.12f}, dev {abs(val - target):.1e} (tol 1e-6), "
              f"{time.perf_counter() - t0:.2f}s")
    assert ok


def test_criterion_4_local_ratio(criterion):
    """Leading-order local-quantum block over the Born-rule local-classical block."""
    eps = 1e-3
    rows, ok = [], True
    for m in range(3, 9):
        tau = local_single_round_optimum(m, eps)
        y = yields(m, TauSchedule((tau,)))
        g = CoherenceSet.uniform(m, 0.5)
        zero = np.zeros(m)
        lq = fz.fisher_local_quantum(m, eps, g, zero, y.gamma_d, y.beta_d, limit=True)
        lc = fz.fisher_local_classical(m, eps, g, zero)
        r = scheme_ratio(lq, lc).ratio
        target = m * (m - 1) / 4
        inside = regime_holds(m, eps, y.gamma_d, y.beta_d)
        ok &= inside and abs(r / target - 1) <= 0.01
        rows.append(f"M={m}: {r:.4f} vs {target:.2f} (x{r / target:.4f})")
    criterion(4, "local quantum / local classical = M(M-1)/4", bool(ok), "; ".join(rows))
    assert ok


def test_criterion_5_gamma_fit(criterion):
    t0 = time.perf_counter()
    rows, worst = [], 0.0
    for m in range(3, 11):
        dev = abs(optimize_gamma(m, 70).gamma_d * (m - 1) - 1)
        worst = max(worst, dev)
        rows.append(f"M={m}: {dev:.4f}")
    ok = worst < 0.01
    criterion(5, "|gamma_70 (M-1) - 1| < 0.01", ok,
              "; ".join(rows) + f"; worst {worst:.4f}; {time.perf_counter() - t0:.1f}s")
    assert ok


def test_criterion_6_scheme_ratios(criterion):
    rng = np.random.default_rng(6)
    dev_w, dev_b, dev_mp = 0.0, 0.0, 0.0
    for m in range(3, 9):
        g = random_coherence(rng, m, 0.8)
        d = rng.uniform(-np.pi, np.pi, size=m)
        per_pair = MeasurementSettings(Scheme.W_STATE, telescope_deltas=d).pair_phases(m)
        q = fz.fisher_gjc_quantum(m, 0.01, g, per_pair, gamma_d=1.0 / (m - 1))
        dev_w = max(dev_w, abs(scheme_ratio(fz.fisher_wstate(m, 0.01, g, d), q).ratio - 2 * (m - 1) / m))
        if m % 2 == 0:
            b = fz.fisher_all_pairs_bipartite(m, 0.01, g, per_pair)
            dev_b = max(dev_b, float(np.max(np.abs(b.matrix - q.matrix))))
        mp = fz.fisher_multipartite_frame(m, 0.01, g, d)
        for k, ph in enumerate(per_pair):
            c, s = np.cos(ph), np.sin(ph)
            ref = 4 * 0.01 ** 2 / m ** 2 * np.array([[c * c, c * s], [c * s, s * s]])
            dev_mp = max(dev_mp, float(np.max(np.abs(mp.blocks[k] - ref))))
    ok = dev_w <= 1e-10 and dev_b <= 1e-10 and dev_mp <= 1e-10
    criterion(6, "W-state, bipartite and shared-frame ratios", ok,
              f"W/GJC-quantum dev {dev_w:.1e}, bipartite dev {dev_b:.1e}, shared-frame block dev {dev_mp:.1e} (tol 1e-10)")
    assert ok


def test_criterion_7_analytic_vs_numeric(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, where = 0.0, None
    for t in range(100):
        scheme = ALL_SCHEMES[t % len(ALL_SCHEMES)]
        m = int(rng.integers(2, 7))
        if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
            m += 1 if m < 6 else -1
        eps = float(rng.uniform(1e-4, 0.01))
        g = random_coherence(rng, m, 0.85)
        s = _settings(rng, scheme, m)
        y = yields(m, TauSchedule(tuple(rng.uniform(0.05, 0.95, size=int(rng.integers(1, 6))))))
        kw = {"exact": True} if scheme is Scheme.MULTIPARTITE_FRAME else {}
        ana = fisher_closed_form(s, m, eps, g, y, **kw)
        num = fisher_numeric(s, m, eps, g, y)
        rel = float(np.max(np.abs(ana.matrix - num.matrix)) / np.max(np.abs(ana.matrix)))
        if rel > worst:
            worst, where = rel, f"{scheme.value} m={m}"
    ok = worst < 1e-6
    criterion(7, "analytic vs numeric Fisher, 100 configs", ok,
              f"max relative deviation {worst:.1e} at {where} (tol 1e-6), {time.perf_counter() - t0:.1f}s")
    assert ok


def test_criterion_8_monte_carlo(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    n = 10 ** 6
    failures, zmax = [], 0.0
    for c in range(20):
        m = int(rng.integers(3, 7))
        d = int(rng.integers(1, 6))
        sched = TauSchedule(tuple(rng.uniform(0.05, 0.95, size=d)))
        y = yields(m, sched)
        gh, bh = estimate_yields(m, sched, n, seed=100 + c)
        for name, est, val in (("gamma", gh, y.gamma_d), ("beta", bh, y.beta_d)):
            se = np.sqrt(val * (1 - val) / n)
            zmax = max(zmax, abs(est.mean - val) / se)
            if not est.within(val):
                failures.append(f"config {c} {name}")
        scheme = POVM_SCHEMES[c % len(POVM_SCHEMES)] if c % 6 != 5 else Scheme.MULTIPARTITE_FRAME
        if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
            m += 1 if m < 6 else -1
            y = yields(m, sched)
        s = _settings(rng, scheme, m)
        eps = float(rng.uniform(0.005, 0.05))
        g = random_coherence(rng, m)
        emp = simulate_scheme(s, m, eps, g, sched if scheme.needs_yield else None, n, seed=200 + c)
        if scheme is Scheme.MULTIPARTITE_FRAME:
            ana = fz.multipartite_frame_distribution(m, eps, g, s.telescope_phases(m))
        else:
            ana = born_distribution(build_povm(s, m, y), build_stellar_state(m, eps, g))
        rows, agree = emp.compare(ana)
        zmax = max(zmax, max(abs(r[3]) for r in rows if np.isfinite(r[3])))
        if not agree:
            failures.append(f"config {c} {scheme.value}")
    sched = TauSchedule((0.3, 0.5, 0.7))
    g = CoherenceSet.uniform(4, 0.4)
    runs = [simulate_distillation(4, 0.02, g, sched, 300_000, seed=9, threads=k) for k in (1, 2, 4)]
    bitwise = all(r.pairs == runs[0].pairs and r.failure == runs[0].failure for r in runs)
    s = MeasurementSettings(Scheme.GJC_CLASSICAL, delta=0.2)
    e = [simulate_scheme(s, 4, 0.02, g, None, 300_000, seed=9, threads=k).counts for k in (1, 3)]
    bitwise &= bool(np.array_equal(e[0], e[1]))
    ok = not failures and bitwise
    criterion(8, "Monte Carlo oracle, 20 configs at n=1e6", ok,
              f"max |z| {zmax:.2f} (tol 4), failures {failures or 'none'}, "
              f"thread-count bitwise reproducible {bitwise}, {time.perf_counter() - t0:.0f}s")
    assert ok


def test_criterion_9_property_ensembles(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    n = 10 ** 4
    kraus = max(completeness_residual(t) for t in rng.uniform(0, 1, size=n))
    worst_c, worst_e = 0.0, 0.0
    for _ in range(n):
        scheme = POVM_SCHEMES[int(rng.integers(len(POVM_SCHEMES)))]
        m = int(rng.integers(2, 9))
        if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
            m -= 1
        y = yields(m, TauSchedule(tuple(rng.uniform(0.01, 0.99, size=int(rng.integers(1, 11))))))
        povm = build_povm(_settings(rng, scheme, m), m, y)
        worst_c = max(worst_c, povm.completeness_residual())
        worst_e = min(worst_e, povm.min_eigenvalue())
    cs, ident = np.inf, 0.0
    for _ in range(n):
        m = int(rng.integers(3, 9))
        y = yields(m, TauSchedule(tuple(rng.uniform(0.01, 0.99, size=int(rng.integers(1, 11))))))
        cs = min(cs, y.beta_d - y.gamma_d ** 2)
        ident = max(ident, y.identity_residual())
    rank = 0.0
    for k in range(n):
        scheme = ALL_SCHEMES[k % len(ALL_SCHEMES)]
        m = int(rng.integers(3, 9))
        if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
            m -= 1
        g = random_coherence(rng, m, 0.85)
        y = yields(m, TauSchedule(tuple(rng.uniform(0.05, 0.95, size=int(rng.integers(1, 6))))))
        f = fisher_closed_form(_settings(rng, scheme, m), m, float(rng.uniform(1e-4, 0.01)), g, y)
        scale = np.max(np.abs(f.blocks), axis=(1, 2)) ** 2
        det = np.abs(f.block_determinants())
        rank = max(rank, float(np.max(det / np.where(scale > 0, scale, 1.0))))
    norm = 0.0
    for _ in range(n):
        m = int(rng.integers(2, 9))
        g = random_coherence(rng, m)
        d = rng.uniform(-np.pi, np.pi, size=m)
        eps = float(rng.uniform(0, 0.2))
        norm = max(norm, abs(fz.wstate_distribution(m, eps, g, d).total - 1),
                   abs(fz.multipartite_frame_distribution(m, eps, g, d).total - 1))
    ok = (kraus < 1e-15 and worst_c < 1e-10 and worst_e > -1e-10 and cs >= -1e-15
          and ident < 1e-12 and rank < 1e-10 and norm < 1e-12)
    criterion(9, "property ensembles (1e4 each)", ok,
              f"kraus {kraus:.1e}, POVM completeness {worst_c:.1e}, min eig {worst_e:.1e}, "
              f"min beta-gamma^2 {cs:.1e}, identity {ident:.1e}, block det/|B|^2 {rank:.1e}, "
              f"normalization {norm:.1e}, {time.perf_counter() - t0:.0f}s")
    assert ok
