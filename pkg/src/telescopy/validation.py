"""Quick invariant suite behind ``telescopy validate``.

Each check returns ``(name, passed, detail)``. The closed-form dispatcher is a
parameter so a deliberately broken prefactor can be injected in tests.
"""

import numpy as np

from . import fisher as fz
from .distillation import (
    TauSchedule,
    Variant,
    ansatz_schedule,
    closed_form_m3,
    optimize_gamma,
    yields,
)
from .kraus import ancilla_circuit_check, completeness_residual
from .montecarlo import estimate_yields
from .povm import MeasurementSettings, Scheme, born_distribution, build_povm
from .state import (
    CoherenceSet,
    apply_weak_round,
    build_stellar_state,
    outcome_vectors,
)

POVM_SCHEMES = (
    Scheme.GJC_CLASSICAL,
    Scheme.GJC_QUANTUM,
    Scheme.LOCAL_CLASSICAL,
    Scheme.LOCAL_QUANTUM,
    Scheme.ALL_PAIRS_BIPARTITE,
)


def random_coherence(rng, m, scale=0.9):
    """Coherences from a random point-source mixture, so the block is always PSD."""
    k = rng.integers(1, 4)
    pos = rng.uniform(-1, 1, size=k)
    w = rng.dirichlet(np.ones(k))
    u = rng.uniform(-2, 2, size=m)
    vals = [scale * np.sum(w * np.exp(1j * (u[i] - u[j]) * pos)) for i in range(m) for j in range(i + 1, m)]
    return CoherenceSet(m, vals)


def random_schedule(rng, d, variant=Variant.PURE_WEAK):
    n = d - 1 if variant is Variant.HARD_FINAL else d
    return TauSchedule(tuple(rng.uniform(0.02, 0.98, size=n)), variant)


def random_settings(rng, scheme, m):
    return MeasurementSettings(scheme, delta=float(rng.uniform(0, 2 * np.pi)),
                               telescope_deltas=rng.uniform(0, 2 * np.pi, size=m))


def check_kraus():
    taus = np.linspace(0.0, 1.0, 101)
    worst = max(completeness_residual(t) for t in taus)
    anc = max(ancilla_circuit_check(t) for t in np.linspace(0.01, 0.99, 99))
    ok = worst < 1e-15 and anc < 1e-12
    return "kraus completeness and ancilla circuit", ok, f"completeness {worst:.2e}, circuit {anc:.2e}"


def check_weak_round(rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(2, 6))
        s = build_stellar_state(m, rng.uniform(1e-4, 0.05), random_coherence(rng, m))
        tau = rng.uniform(0.01, 0.99)
        total = 0.0
        for bits in outcome_vectors(m):
            try:
                total += apply_weak_round(s, tau, bits)[0]
            except ValueError:
                pass
        worst = max(worst, abs(total - 1.0))
    return "weak-round outcome probabilities sum to one", worst < 1e-10, f"max deviation {worst:.2e}"


def check_povms(rng, trials=60):
    worst_c, worst_e = 0.0, 0.0
    for _ in range(trials):
        m = int(rng.integers(2, 7))
        scheme = POVM_SCHEMES[int(rng.integers(len(POVM_SCHEMES)))]
        if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
            m += 1
        y = yields(m, random_schedule(rng, int(rng.integers(1, 6)))) if m > 2 else yields(m, (0.5,))
        povm = build_povm(random_settings(rng, scheme, m), m, y)
        worst_c = max(worst_c, povm.completeness_residual())
        worst_e = min(worst_e, povm.min_eigenvalue())
        dist = born_distribution(povm, build_stellar_state(m, 0.01, random_coherence(rng, m)))
        dist.check()
    ok = worst_c < 1e-10 and worst_e > -1e-10
    return "POVM completeness and positivity", ok, f"completeness {worst_c:.2e}, min eigenvalue {worst_e:.2e}"


def check_yields(rng, trials=2000):
    worst_id, worst_cs = 0.0, np.inf
    for _ in range(trials):
        m = int(rng.integers(3, 9))
        y = yields(m, random_schedule(rng, int(rng.integers(1, 11))))
        worst_id = max(worst_id, y.identity_residual())
        worst_cs = min(worst_cs, y.beta_d - y.gamma_d ** 2)
    ok = worst_id < 1e-12 and worst_cs >= -1e-15
    return "yield identity and Cauchy-Schwarz bound", ok, f"identity {worst_id:.2e}, min beta-gamma^2 {worst_cs:.2e}"


def check_m3():
    dev_a = max(abs(yields(3, ansatz_schedule(d)).gamma_d - closed_form_m3(d)) for d in range(1, 21))
    dev_h = 0.0
    for d in range(1, 8):
        r = optimize_gamma(3, d, Variant.HARD_FINAL, budget=2_000_000)
        dev_h = max(dev_h, abs(r.gamma_d - closed_form_m3(d, Variant.HARD_FINAL)))
    ok = dev_a < 1e-12 and dev_h < 1e-8
    return "three-telescope closed forms", ok, f"ansatz {dev_a:.2e}, hard-final optimum {dev_h:.2e}"


def check_fisher(rng, trials=24, closed_form=None):
    closed_form = closed_form or fz.fisher_closed_form
    schemes = POVM_SCHEMES + (Scheme.W_STATE, Scheme.MULTIPARTITE_FRAME)
    worst = 0.0
    for t in range(trials):
        scheme = schemes[t % len(schemes)]
        m = int(rng.integers(3, 7))
        if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
            m += 1 if m < 6 else -1
        eps = float(rng.uniform(1e-4, 0.01))
        g = random_coherence(rng, m, scale=0.8)
        settings = random_settings(rng, scheme, m)
        y = yields(m, random_schedule(rng, int(rng.integers(1, 5))))
        kw = {"exact": True} if scheme is Scheme.MULTIPARTITE_FRAME else {}
        num = fz.fisher_numeric(settings, m, eps, g, y)
        ana = closed_form(settings, m, eps, g, y, **kw)
        rel = np.max(np.abs(num.matrix - ana.matrix)) / np.max(np.abs(ana.matrix))
        worst = max(worst, rel)
    return "analytic vs numeric Fisher", worst < 1e-6, f"max relative deviation {worst:.2e}"


def check_direct_distributions(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(2, 9))
        g = random_coherence(rng, m)
        d = rng.uniform(0, 2 * np.pi, size=m)
        eps = float(rng.uniform(0, 0.2))
        worst = max(worst, abs(fz.wstate_distribution(m, eps, g, d).total - 1.0))
        worst = max(worst, abs(fz.multipartite_frame_distribution(m, eps, g, d).total - 1.0))
    return "W-state and shared-frame normalization", worst < 1e-12, f"max deviation {worst:.2e}"


def check_ratios(rng):
    worst = 0.0
    for m in range(3, 9):
        g = random_coherence(rng, m, 0.7)
        d = rng.uniform(0, 2 * np.pi, size=m)
        settings = MeasurementSettings(Scheme.W_STATE, telescope_deltas=d)
        per_pair = settings.pair_phases(m)
        w = fz.fisher_wstate(m, 0.01, g, d)
        q = fz.fisher_gjc_quantum(m, 0.01, g, per_pair, gamma_d=1.0 / (m - 1))
        worst = max(worst, abs(fz.scheme_ratio(w, q).ratio - 2 * (m - 1) / m))
        if m % 2 == 0:
            b = fz.fisher_all_pairs_bipartite(m, 0.01, g, per_pair)
            worst = max(worst, float(np.max(np.abs(b.matrix - q.matrix))))
    return "W-state and bipartite scheme ratios", worst < 1e-10, f"max deviation {worst:.2e}"


def check_montecarlo(n=200_000, seed=7):
    sched = TauSchedule((0.3, 0.45, 0.6))
    y = yields(4, sched)
    g_hat, b_hat = estimate_yields(4, sched, n, seed)
    ok = g_hat.within(y.gamma_d) and b_hat.within(y.beta_d)
    detail = f"gamma {g_hat.mean:.5f} vs {y.gamma_d:.5f}, beta {b_hat.mean:.5f} vs {y.beta_d:.5f}"
    return "Monte Carlo yields within 4 standard errors", ok, detail


def run_checks(seed=0, closed_form=None):
    rng = np.random.default_rng(seed)
    checks = [
        check_kraus(),
        check_weak_round(rng),
        check_povms(rng),
        check_yields(rng),
        check_m3(),
        check_fisher(rng, closed_form=closed_form),
        check_direct_distributions(rng),
        check_ratios(rng),
        check_montecarlo(seed=seed + 7),
    ]
    return [(name, bool(ok), detail) for name, ok, detail in checks]
