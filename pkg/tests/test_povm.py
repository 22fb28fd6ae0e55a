import numpy as np
import pytest

from telescopy import MeasurementSettings, Scheme, born_distribution, build_povm, build_stellar_state, yields
from telescopy.distillation import TauSchedule
from telescopy.povm import compress_operator, delta_state, local_basis_state
from telescopy.state import CoherenceSet

POVM_SCHEMES = [Scheme.GJC_CLASSICAL, Scheme.GJC_QUANTUM, Scheme.LOCAL_CLASSICAL,
                Scheme.LOCAL_QUANTUM, Scheme.ALL_PAIRS_BIPARTITE]


def _settings(scheme, m, delta=0.4):
    if scheme.pair_phased:
        return MeasurementSettings(scheme, delta=delta)
    return MeasurementSettings(scheme, telescope_deltas=np.linspace(0, delta, m))


@pytest.mark.parametrize("scheme", POVM_SCHEMES)
@pytest.mark.parametrize("m", [2, 3, 4, 6])
def test_complete_and_positive(scheme, m):
    if scheme is Scheme.ALL_PAIRS_BIPARTITE and m % 2:
        pytest.skip("needs even m")
    y = yields(m, TauSchedule((0.3, 0.5)))
    povm = build_povm(_settings(scheme, m), m, y)
    assert povm.completeness_residual() < 1e-12
    assert povm.min_eigenvalue() > -1e-12
    assert povm.hermiticity_residual() < 1e-15


def test_gjc_classical_probabilities():
    # informative outcome probability eps (1 +/- Re(g e^{-i delta})) / (2 M C(M,2))
    m, eps, g, d = 3, 0.01, 0.5 + 0.2j, 0.3
    dist = born_distribution(build_povm(MeasurementSettings(Scheme.GJC_CLASSICAL, delta=d), m),
                             build_stellar_state(m, eps, CoherenceSet.uniform(m, g)))
    u = (g * np.exp(-1j * d)).real
    assert dist["AB:pm+"] == pytest.approx(eps * (1 + u) / (2 * m * 3), rel=1e-13)
    assert dist["BC:pm-"] == pytest.approx(eps * (1 - u) / (2 * m * 3), rel=1e-13)


def test_gjc_quantum_probabilities():
    m, eps, g, gam = 4, 0.005, 0.3 - 0.4j, 0.2
    settings = MeasurementSettings(Scheme.GJC_QUANTUM, delta=1.1)

    class Y:
        gamma_d, beta_d = gam, 0.05

    dist = born_distribution(build_povm(settings, m, Y), build_stellar_state(m, eps, CoherenceSet.uniform(m, g)))
    u = (g * np.exp(-1.1j)).real
    assert dist["AC:pm+"] == pytest.approx(eps * gam * (1 + u) / (2 * m), rel=1e-13)


def test_local_quantum_sign_follows_visibility():
    m, eps = 3, 0.01
    y = yields(m, TauSchedule((0.6,)))
    for g, expect in ((0.6, 1), (-0.6, -1), (0.6j, 0)):
        settings = MeasurementSettings(Scheme.LOCAL_QUANTUM, telescope_deltas=(0.0, 0.0, 0.0))
        dist = born_distribution(build_povm(settings, m, y),
                                 build_stellar_state(m, eps, CoherenceSet.from_mapping(m, {(0, 1): g, (0, 2): 0, (1, 2): 0})))
        diff = dist["AB:alpha=00"] - dist["AB:alpha=01"]
        assert np.sign(round(diff, 15)) == expect


def test_missing_yield_and_odd_bipartite():
    with pytest.raises(ValueError, match="yield"):
        build_povm(MeasurementSettings(Scheme.GJC_QUANTUM), 3)
    with pytest.raises(ValueError, match="even"):
        build_povm(MeasurementSettings(Scheme.ALL_PAIRS_BIPARTITE), 5)
    with pytest.raises(ValueError):
        build_povm(MeasurementSettings(Scheme.W_STATE), 3)


def test_oversized_yield_rejected():
    class Y:
        gamma_d, beta_d = 0.9, 0.9

    with pytest.raises(ValueError, match="exceed the identity"):
        build_povm(MeasurementSettings(Scheme.GJC_QUANTUM), 4, Y)


def test_compress_matches_explicit_embedding():
    # |delta+><delta+| on (A, B) with vacuum on C, compared entry by entry
    m = 3
    psi = delta_state(0.7, +1)
    op = compress_operator(m, (0, 1), np.outer(psi, psi.conj()), np.diag([1.0, 0.0]))
    assert op[1, 1] == pytest.approx(0.5)
    assert op[1, 2] == pytest.approx(0.5 * np.exp(0.7j))
    assert op[3, 3] == 0.0
    assert op[0, 0] == 0.0


def test_local_basis_states_orthonormal():
    a, b = local_basis_state(0.3, 0), local_basis_state(0.3, 1)
    assert abs(np.vdot(a, b)) < 1e-15
    assert np.vdot(a, a).real == pytest.approx(1.0)
