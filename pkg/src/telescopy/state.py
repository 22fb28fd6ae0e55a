"""Stellar light on M telescopes, truncated to at most one photon.

The truncated Hilbert space has basis ``{|0...0>, |e_1>, ..., |e_M>}`` where
``|e_j>`` carries the photon at telescope ``j``. States are kept as a vacuum
weight plus an ``M x M`` single-photon block, since every measurement used in
this package acts block-diagonally on that split.
"""

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Optional

import numpy as np

from .kraus import weak_kraus

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
COHERENCE_TOL = 1e-9
EPS_WARN = 0.1


# ---------------------------------------------------------------- pairs


@lru_cache(maxsize=None)
def pairs(m):
    """Unordered telescope pairs in lexicographic order: (0,1), (0,2), ..., (m-2,m-1)."""
    if m < 2:
        raise ValueError(f"need at least two telescopes, got m={m}")
    return tuple(itertools.combinations(range(m), 2))


def n_pairs(m):
    return m * (m - 1) // 2


def pair_index(m, pair):
    i, j = pair
    if i > j:
        i, j = j, i
    if not 0 <= i < j < m:
        raise ValueError(f"invalid pair {pair} for m={m}")
    # offset of the row i in the lexicographic list, then column
    return i * (2 * m - i - 1) // 2 + (j - i - 1)


def telescope_name(i):
    if i < 26:
        return chr(ord("A") + i)
    return f"T{i + 1}"


def pair_name(pair):
    i, j = pair
    if i < 26 and j < 26:
        return telescope_name(i) + telescope_name(j)
    return f"{telescope_name(i)}-{telescope_name(j)}"


def parse_pair(m, key):
    """Accept ``(i, j)``, ``"AB"``, ``"A-B"`` or ``"0-1"`` and return a sorted index pair."""
    if isinstance(key, str):
        text = key.strip()
        if "-" in text:
            left, right = text.split("-", 1)
            idx = [_parse_telescope(t) for t in (left, right)]
        elif len(text) == 2 and text.isalpha():
            idx = [_parse_telescope(c) for c in text]
        else:
            raise ValueError(f"cannot parse pair label {key!r}")
    else:
        idx = [int(k) for k in key]
    if len(idx) != 2:
        raise ValueError(f"pair label {key!r} must name two telescopes")
    i, j = sorted(idx)
    if not 0 <= i < j < m:
        raise ValueError(f"pair {key!r} out of range for m={m}")
    return i, j


def _parse_telescope(token):
    token = token.strip()
    if token.isdigit():
        return int(token)
    if token.upper().startswith("T") and token[1:].isdigit():
        return int(token[1:]) - 1
    if len(token) == 1 and token.isalpha():
        return ord(token.upper()) - ord("A")
    raise ValueError(f"cannot parse telescope label {token!r}")


# ---------------------------------------------------------------- inputs


@dataclass(frozen=True)
class TelescopeArray:
    """Telescope count plus optional per-pair wavenumbers ``k_XY``.

    Baselines follow the lexicographic pair order. ``from_positions`` builds
    them as ``k * (u_X - u_Y)``, which is what keeps the resulting coherence
    matrix positive for physical sources.
    """

    m: int
    baselines: Optional[tuple] = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m}")
        if self.baselines is not None:
            k = tuple(float(v) for v in self.baselines)
            if len(k) != n_pairs(self.m):
                raise ValueError(
                    f"expected {n_pairs(self.m)} baselines for m={self.m}, got {len(k)}"
                )
            if not all(np.isfinite(k)):
                raise ValueError("baselines must be finite")
            object.__setattr__(self, "baselines", k)

    @classmethod
    def from_positions(cls, positions, wavenumber=1.0):
        u = np.asarray(positions, dtype=float)
        m = len(u)
        k = [wavenumber * (u[i] - u[j]) for i, j in pairs(m)]
        return cls(m, tuple(k))


@dataclass(frozen=True)
class CoherenceSet:
    """Complex coherences ``g_XY`` for every unordered pair, stored once per pair."""

    m: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).reshape(-1)
        if v.shape[0] != n_pairs(self.m):
            raise ValueError(f"expected {n_pairs(self.m)} coherences, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("coherences must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_mapping(cls, m, mapping: Mapping):
        values = np.full(n_pairs(m), np.nan, dtype=complex)
        for key, g in mapping.items():
            values[pair_index(m, parse_pair(m, key))] = complex(g)
        missing = [pair_name(p) for p, v in zip(pairs(m), values) if np.isnan(v)]
        if missing:
            raise ValueError(f"missing coherence for pairs {', '.join(missing)}")
        return cls(m, values)

    @classmethod
    def uniform(cls, m, g):
        return cls(m, np.full(n_pairs(m), complex(g)))

    def __getitem__(self, pair):
        i, j = pair
        g = self.values[pair_index(self.m, pair)]
        return g if i < j else np.conj(g)

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def phase(self):
        return np.angle(self.values)

    def as_dict(self):
        return {p: complex(g) for p, g in zip(pairs(self.m), self.values)}


@dataclass(frozen=True)
class SourceModel:
    """Normalized 1-D source intensity.

    Either a discrete set of point emitters (``positions``/``weights``) or a
    continuous ``density`` supported on ``support``.
    """

    positions: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    density: Optional[Callable] = None
    support: Optional[tuple] = None
    norm_tol: float = 1e-10

    def __post_init__(self):
        if self.density is None:
            if self.positions is None:
                raise ValueError("source needs either point positions or a density")
            x = np.atleast_1d(np.asarray(self.positions, dtype=float))
            w = (
                np.full(x.shape, 1.0 / x.size)
                if self.weights is None
                else np.atleast_1d(np.asarray(self.weights, dtype=float))
            )
            if w.shape != x.shape:
                raise ValueError("positions and weights must have the same length")
            if np.any(w < 0):
                raise ValueError("source intensity must be nonnegative")
            if abs(w.sum() - 1.0) > self.norm_tol:
                raise ValueError(f"source weights sum to {w.sum():.15g}, expected 1")
            object.__setattr__(self, "positions", x)
            object.__setattr__(self, "weights", w)
        else:
            if self.support is None:
                raise ValueError("a density source needs a finite support interval")
            lo, hi = (float(s) for s in self.support)
            if not hi > lo:
                raise ValueError(f"empty support {self.support}")
            object.__setattr__(self, "support", (lo, hi))
            total = adaptive_gauss_legendre(self._density_checked, lo, hi).real
            if abs(total - 1.0) > self.norm_tol:
                raise ValueError(f"source intensity integrates to {total:.15g}, expected 1")

    def _density_checked(self, x):
        v = np.asarray(self.density(x), dtype=float)
        if np.any(v < 0):
            raise ValueError("source intensity must be nonnegative")
        return v

    @classmethod
    def point(cls, x0=0.0):
        return cls(positions=np.array([float(x0)]), weights=np.array([1.0]))

    @classmethod
    def uniform(cls, width, center=0.0):
        lo, hi = center - width / 2.0, center + width / 2.0
        return cls(density=lambda x: np.full(np.shape(x), 1.0 / width), support=(lo, hi))

    @property
    def is_discrete(self):
        return self.density is None

    def fourier(self, k):
        """``integral I(x) exp(i k x) dx``."""
        if self.is_discrete:
            return complex(np.sum(self.weights * np.exp(1j * k * self.positions)))
        lo, hi = self.support
        return complex(
            adaptive_gauss_legendre(
                lambda x: self._density_checked(x) * np.exp(1j * k * x), lo, hi,
                panels=1 + int(abs(k) * (hi - lo) / np.pi),
            )
        )


def adaptive_gauss_legendre(f, a, b, rtol=1e-9, atol=1e-15, order=16, panels=1, max_depth=40):
    """Integrate ``f`` over ``[a, b]`` by recursive bisection of Gauss-Legendre panels.

    A panel is accepted once its estimate matches the sum over its two halves
    to ``max(atol, rtol * |estimate|)``.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        return half * np.sum(weights * f(0.5 * (hi + lo) + half * nodes))

    def refine(lo, hi, whole, depth):
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        both = left + right
        if depth >= max_depth or abs(both - whole) <= max(atol, rtol * abs(both)):
            return both
        return refine(lo, mid, left, depth + 1) + refine(mid, hi, right, depth + 1)

    edges = np.linspace(a, b, int(panels) + 1)
    return sum(refine(lo, hi, rule(lo, hi), 0) for lo, hi in zip(edges[:-1], edges[1:]))


def coherence_from_source(src: SourceModel, arr: TelescopeArray) -> CoherenceSet:
    """Coherence of each pair as a Fourier component of the source intensity."""
    if arr.baselines is None:
        raise ValueError("telescope array has no baselines")
    g = np.array([src.fourier(k) for k in arr.baselines])
    if np.any(np.abs(g) > 1.0 + COHERENCE_TOL):
        raise ValueError("quadrature produced |g| > 1; check source normalization")
    return CoherenceSet(arr.m, g)


# ---------------------------------------------------------------- states


@dataclass(frozen=True)
class TruncatedState:
    """Generic (possibly unnormalized) operator ``vacuum |0><0| + sum block_ij |e_i><e_j|``."""

    vacuum: float
    block: np.ndarray

    def __post_init__(self):
        b = np.array(self.block, dtype=complex)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("single-photon block must be square")
        b.setflags(write=False)
        object.__setattr__(self, "block", b)
        object.__setattr__(self, "vacuum", float(self.vacuum))

    @property
    def m(self):
        return self.block.shape[0]

    @property
    def trace(self):
        return self.vacuum + float(np.trace(self.block).real)

    @property
    def populations(self):
        return np.diag(self.block).real.copy()

    def normalized(self):
        t = self.trace
        return TruncatedState(self.vacuum / t, self.block / t)

    def to_operator(self):
        op = np.zeros((self.m + 1, self.m + 1), dtype=complex)
        op[0, 0] = self.vacuum
        op[1:, 1:] = self.block
        return op

    @classmethod
    def from_operator(cls, op):
        op = np.asarray(op)
        return cls(op[0, 0].real, op[1:, 1:])

    @classmethod
    def vacuum_state(cls, m):
        return cls(1.0, np.zeros((m, m)))

    @classmethod
    def photon_at(cls, m, j):
        b = np.zeros((m, m))
        b[j, j] = 1.0
        return cls(0.0, b)

    def truncated(self):
        return self


@dataclass(frozen=True)
class StellarState:
    """``(1 - eps)|0...0><0...0| + eps * rho1`` with ``rho1`` the single-photon block."""

    epsilon: float
    single_photon_block: np.ndarray

    @property
    def m(self):
        return self.single_photon_block.shape[0]

    @property
    def vacuum_weight(self):
        return 1.0 - self.epsilon

    def truncated(self):
        return TruncatedState(1.0 - self.epsilon, self.epsilon * self.single_photon_block)

    def to_operator(self):
        return self.truncated().to_operator()

    @property
    def coherences(self):
        b = self.single_photon_block
        return CoherenceSet(self.m, [self.m * b[i, j] for i, j in pairs(self.m)])


def single_photon_block(m, g: CoherenceSet):
    """``rho1`` with ``1/M`` on the diagonal and ``g_XY / M`` above it (no validation)."""
    b = np.eye(m, dtype=complex)
    iu = np.triu_indices(m, 1)
    b[iu] = g.values
    b[(iu[1], iu[0])] = np.conj(g.values)
    return b / m


def build_stellar_state(m, epsilon, g: CoherenceSet) -> StellarState:
    """Stellar state to first order in the mean photon number ``epsilon``."""
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if epsilon > EPS_WARN:
        warnings.warn(
            f"epsilon={epsilon} is outside the weak-source regime; O(eps^2) terms are dropped",
            stacklevel=2,
        )
    if g.m != m:
        raise ValueError(f"coherence set is for m={g.m}, expected m={m}")
    if np.any(np.abs(g.values) > 1.0 + COHERENCE_TOL):
        bad = [pair_name(p) for p, v in zip(pairs(m), g.values) if abs(v) > 1 + COHERENCE_TOL]
        raise ValueError(f"|g| > 1 for pairs {', '.join(bad)}")
    b = single_photon_block(m, g)
    lowest = np.linalg.eigvalsh(b)[0]
    if lowest < -PSD_TOL:
        raise ValueError(
            f"coherences do not form a positive semidefinite block (min eigenvalue {lowest:.3g})"
        )
    b.setflags(write=False)
    return StellarState(epsilon, b)


def _as_truncated(state):
    return state.truncated()


# ---------------------------------------------------------------- weak rounds


@lru_cache(maxsize=None)
def outcome_vectors(m):
    """All ``2**m`` outcome bit vectors, first telescope most significant."""
    v = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int8)
    v.setflags(write=False)
    return v


def outcome_index(bits):
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def kraus_amplitudes(tau, bits):
    """Diagonal of the product Kraus operator for one round and one outcome vector.

    Returns ``(vacuum_amplitude, photon_amplitudes)``; the latter has one
    entry per telescope position of the photon.
    """
    m0, m1 = weak_kraus(tau)
    bits = np.asarray(bits)
    a0 = np.where(bits == 0, m0[0, 0], m1[0, 0])
    a1 = np.where(bits == 0, m0[1, 1], m1[1, 1])
    vac = float(np.prod(a0))
    # photon at j: a1_j times the vacuum amplitudes of every other telescope
    others = np.array([np.prod(np.delete(a0, j)) for j in range(len(bits))])
    return vac, a1 * others


@lru_cache(maxsize=256)
def _round_factors(m, tau):
    bits = outcome_vectors(m)
    vac = np.empty(len(bits))
    pop = np.empty((len(bits), m))
    for k, b in enumerate(bits):
        a_vac, a_ph = kraus_amplitudes(tau, b)
        vac[k] = a_vac ** 2
        pop[k] = a_ph ** 2
    vac.setflags(write=False)
    pop.setflags(write=False)
    return vac, pop


def weak_round_factors(m, tau):
    """Squared Kraus diagonals for every outcome vector: shapes ``(2**m,)`` and ``(2**m, m)``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return _round_factors(int(m), float(tau))


def weak_round_distribution(state, tau):
    """Probability of each of the ``2**m`` outcome vectors of one weak round."""
    s = _as_truncated(state)
    vac, pop = weak_round_factors(s.m, tau)
    return (s.vacuum * vac + pop @ s.populations) / s.trace


def apply_weak_round(state, tau, outcomes):
    """Apply one round of local weak measurements with the given outcome bits.

    Returns the outcome probability and the renormalized post-measurement state.
    """
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    s = _as_truncated(state)
    bits = np.asarray(outcomes)
    if bits.shape != (s.m,) or not np.all((bits == 0) | (bits == 1)):
        raise ValueError(f"outcomes must be {s.m} bits, got {outcomes!r}")
    a_vac, a_ph = kraus_amplitudes(tau, bits)
    post = TruncatedState(s.vacuum * a_vac ** 2, a_ph[:, None] * s.block * a_ph[None, :])
    prob = post.trace / s.trace
    if prob < 1e-300:
        raise ValueError(f"outcome {tuple(int(b) for b in bits)} is impossible for this state")
    return prob, post.normalized()
