import numpy as np
import pytest

from telescopy.state import (
    CoherenceSet,
    SourceModel,
    TelescopeArray,
    TruncatedState,
    apply_weak_round,
    build_stellar_state,
    coherence_from_source,
    outcome_vectors,
    pair_index,
    pair_name,
    pairs,
    parse_pair,
    weak_round_distribution,
)


def test_pair_order_and_names():
    assert pairs(4) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert [pair_index(4, p) for p in pairs(4)] == list(range(6))
    assert pair_index(4, (3, 1)) == 4
    assert pair_name((0, 2)) == "AC"
    for key in ("AC", "A-C", "0-2", (2, 0)):
        assert parse_pair(4, key) == (0, 2)
    with pytest.raises(ValueError):
        parse_pair(3, "AD")
    with pytest.raises(ValueError):
        pairs(1)


def test_stellar_state_layout():
    g = CoherenceSet.from_mapping(3, {(0, 1): 0.5, (0, 2): 0.2j, (1, 2): -0.1})
    s = build_stellar_state(3, 0.01, g)
    op = s.to_operator()
    assert op[0, 0] == pytest.approx(0.99)
    assert np.allclose(np.diag(op)[1:], 0.01 / 3)
    assert op[1, 2] == pytest.approx(0.01 * 0.5 / 3)
    assert op[1, 3] == pytest.approx(0.01 * 0.2j / 3)
    assert op[3, 1] == pytest.approx(-0.01 * 0.2j / 3)
    assert np.trace(op).real == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(s.coherences.values, g.values)


def test_rejects_non_psd_and_large_g():
    with pytest.raises(ValueError, match="positive semidefinite"):
        build_stellar_state(3, 0.01, CoherenceSet.from_mapping(3, {(0, 1): 0.99, (0, 2): 0.99, (1, 2): -0.99}))
    with pytest.raises(ValueError, match=r"\|g\| > 1"):
        build_stellar_state(3, 0.01, CoherenceSet.uniform(3, 1.2))
    with pytest.raises(ValueError):
        build_stellar_state(3, 0.0, CoherenceSet.uniform(3, 0.5))


def test_large_epsilon_warns():
    with pytest.warns(UserWarning):
        build_stellar_state(2, 0.3, CoherenceSet.uniform(2, 0.1))


def test_point_source_coherence():
    # a point source at x0 gives pure phases exp(i k x0)
    arr = TelescopeArray(3, (1.0, 2.0, 3.0))
    g = coherence_from_source(SourceModel.point(0.4), arr)
    assert np.allclose(g.values, np.exp(1j * 0.4 * np.array([1.0, 2.0, 3.0])))


def test_uniform_disk_coherence():
    # unit-width uniform source on [-w/2, w/2]: g(k) = sinc(k w / 2)
    arr = TelescopeArray(2, (3.0,))
    g = coherence_from_source(SourceModel.uniform(0.8), arr)
    assert g.values[0] == pytest.approx(np.sin(1.2) / 1.2, abs=1e-9)


def test_weak_round_probabilities_and_update():
    s = build_stellar_state(3, 0.02, CoherenceSet.uniform(3, 0.4 + 0.1j))
    p = weak_round_distribution(s, 0.3)
    assert p.sum() == pytest.approx(1.0, abs=1e-14)
    # all-M0: vacuum survives with 0.7^3, the photon component with 0.7^2
    assert p[0] == pytest.approx(0.98 * 0.7 ** 3 + 0.02 * 0.7 ** 2, rel=1e-14)
    prob, post = apply_weak_round(s, 0.3, (0, 0, 0))
    assert prob == pytest.approx(p[0])
    t = post.truncated() if hasattr(post, "truncated") else post
    # the single-photon block keeps its coherences relative to populations
    assert t.block[0, 1] / t.block[0, 0] == pytest.approx(0.4 + 0.1j)
    # telescope 0 heralds vacuum: photon can only be at 1 or 2, any coherence with 0 vanishes
    prob, post = apply_weak_round(s, 0.3, (1, 0, 0))
    t = post.truncated() if hasattr(post, "truncated") else post
    assert abs(t.block[0, 0]) == 0.0 and abs(t.block[0, 1]) == 0.0
    assert t.block[1, 2] / t.block[1, 1] == pytest.approx(0.4 + 0.1j)


def test_impossible_branch_rejected():
    photon = TruncatedState.photon_at(2, 0)
    with pytest.raises(ValueError):
        apply_weak_round(photon, 0.5, (1, 1))


def test_outcome_vector_order():
    v = outcome_vectors(3)
    assert v.shape == (8, 3)
    assert tuple(v[1]) == (0, 0, 1) and tuple(v[4]) == (1, 0, 0)
