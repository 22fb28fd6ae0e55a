"""Fisher information of the coherence parameters ``(a_XY, b_XY)``.

Closed forms are written per pair as ``prefactor * n n^T`` with
``n = (cos delta, sin delta)``; :func:`fisher_numeric` differentiates Born
probabilities by central differences and is the independent cross-check.
"""

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .povm import FAILURE, MeasurementSettings, Outcome, OutcomeDistribution, Scheme, build_povm
from .state import (
    COHERENCE_TOL,
    CoherenceSet,
    TruncatedState,
    n_pairs,
    pair_name,
    pairs,
    single_photon_block,
    telescope_name,
)

PER_PHOTON = "per terrestrial photon"
PER_PROJECTION = "per pair of projective measurement"
SINGULAR_VISIBILITY = 1.0 - 1e-6
P_FLOOR = 1e-14
PROPORTIONALITY_TOL = 1e-8


# ---------------------------------------------------------------- containers


@dataclass(frozen=True)
class ParameterVector:
    """``(a_AB, b_AB, a_AC, b_AC, ...)`` in lexicographic pair order."""

    m: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape[0] != 2 * n_pairs(self.m):
            raise ValueError(f"expected {2 * n_pairs(self.m)} parameters, got {v.shape[0]}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_coherence(cls, g: CoherenceSet):
        v = np.empty(2 * n_pairs(g.m))
        v[0::2] = g.values.real
        v[1::2] = g.values.imag
        return cls(g.m, v)

    def coherence(self):
        return CoherenceSet(self.m, self.values[0::2] + 1j * self.values[1::2])

    @property
    def names(self):
        return tuple(f"{c}_{pair_name(p)}" for p in pairs(self.m) for c in "ab")

    def is_physical(self, tol=COHERENCE_TOL):
        return bool(np.all(np.hypot(self.values[0::2], self.values[1::2]) <= 1.0 + tol))


@dataclass(frozen=True)
class FisherMatrix:
    m: int
    matrix: np.ndarray
    normalization: str = PER_PHOTON
    singular: bool = False
    regime: Optional[bool] = None
    label: str = ""

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.shape != (2 * n_pairs(self.m),) * 2:
            raise ValueError(f"Fisher matrix shape {a.shape} does not match m={self.m}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def blocks(self):
        c = n_pairs(self.m)
        return np.stack([self.matrix[2 * k:2 * k + 2, 2 * k:2 * k + 2] for k in range(c)])

    def block(self, pair):
        return self.blocks[pairs(self.m).index(tuple(sorted(pair)))]

    def off_block_max(self):
        mask = np.ones_like(self.matrix, dtype=bool)
        for k in range(n_pairs(self.m)):
            mask[2 * k:2 * k + 2, 2 * k:2 * k + 2] = False
        return float(np.max(np.abs(self.matrix[mask]))) if mask.any() else 0.0

    def block_determinants(self):
        return np.linalg.det(self.blocks)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def symmetry_residual(self):
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    def scaled(self, c):
        return FisherMatrix(self.m, c * self.matrix, self.normalization, self.singular, self.regime, self.label)


@dataclass(frozen=True)
class SchemeRatio:
    numerator: str
    denominator: str
    ratio: float
    residual: float


# ---------------------------------------------------------------- argument handling


def as_coherence(m, g):
    if isinstance(g, CoherenceSet):
        if g.m != m:
            raise ValueError(f"coherence set is for m={g.m}, expected m={m}")
        return g
    if isinstance(g, ParameterVector):
        return g.coherence()
    if isinstance(g, dict):
        return CoherenceSet.from_mapping(m, g)
    if np.ndim(g) == 0:
        return CoherenceSet.uniform(m, g)
    return CoherenceSet(m, g)


def _check_physical(g):
    if np.any(np.abs(g.values) > 1.0 + COHERENCE_TOL):
        raise ValueError("nonphysical coherences: |g| > 1")


def _pair_phases(m, delta=0.0, deltas=None):
    """Per-pair phases from a per-pair ``delta`` (scalar or array) or per-telescope ``deltas``."""
    if isinstance(delta, MeasurementSettings):
        return delta.pair_phases(m)
    if deltas is not None:
        d = np.asarray(deltas, dtype=float)
        if d.shape != (m,):
            raise ValueError(f"expected {m} telescope phases, got shape {d.shape}")
        return np.array([d[i] - d[j] for i, j in pairs(m)])
    d = np.broadcast_to(np.asarray(delta, dtype=float), (n_pairs(m),))
    return np.array(d)


def _visibility(g, phases):
    """``u = Re(g e^{-i delta}) = a cos delta + b sin delta`` per pair."""
    return g.values.real * np.cos(phases) + g.values.imag * np.sin(phases)


def _assemble(m, prefactors, phases, **kw):
    c = n_pairs(m)
    out = np.zeros((2 * c, 2 * c))
    for k in range(c):
        n = np.array([np.cos(phases[k]), np.sin(phases[k])])
        out[2 * k:2 * k + 2, 2 * k:2 * k + 2] = prefactors[k] * np.outer(n, n)
    return FisherMatrix(m, out, **kw)


def _visibility_block(m, scale, g, phases, label):
    u = _visibility(g, phases)
    singular = bool(np.any(np.abs(u) > SINGULAR_VISIBILITY))
    with np.errstate(divide="ignore", invalid="ignore"):
        pref = np.where(np.abs(u) > SINGULAR_VISIBILITY, np.nan, scale / (1.0 - u ** 2))
    return _assemble(m, pref, phases, normalization=PER_PHOTON, singular=singular, label=label)


# ---------------------------------------------------------------- closed forms


def fisher_gjc_classical(m, epsilon, g, delta=0.0) -> FisherMatrix:
    g = as_coherence(m, g)
    c = n_pairs(m)
    return _visibility_block(m, epsilon / (m * c), g, _pair_phases(m, delta), "gjc_classical")


def fisher_gjc_quantum(m, epsilon, g, delta=0.0, gamma_d=None) -> FisherMatrix:
    if gamma_d is None:
        raise ValueError("gjc_quantum needs gamma_d")
    g = as_coherence(m, g)
    gamma_d = float(getattr(gamma_d, "gamma_d", gamma_d))
    return _visibility_block(m, gamma_d * epsilon / m, g, _pair_phases(m, delta), "gjc_quantum")


def fisher_all_pairs_bipartite(m, epsilon, g, delta=0.0) -> FisherMatrix:
    if m % 2:
        raise ValueError(f"all-pairs bipartite distribution needs even m, got m={m}")
    g = as_coherence(m, g)
    return _visibility_block(m, epsilon / (m * (m - 1)), g, _pair_phases(m, delta), "all_pairs_bipartite")


def fisher_wstate(m, epsilon, g, deltas=None) -> FisherMatrix:
    g = as_coherence(m, g)
    phases = _pair_phases(m, deltas=np.zeros(m) if deltas is None else deltas)
    return _visibility_block(m, 2.0 * epsilon / m ** 2, g, phases, "w_state")


def fisher_local_classical(m, epsilon, g, deltas=None, leading_order=False) -> FisherMatrix:
    """Four outcomes per pair, each drawn with the coin weight ``1 / C(M,2)``.

    Exact in the truncated model: ``8 eps^2 / (M^3 (M-1)) / (1 - w^2)`` with
    ``w = 2 eps u / M``; ``leading_order`` drops the ``w^2`` term.
    """
    g = as_coherence(m, g)
    phases = _pair_phases(m, deltas=np.zeros(m) if deltas is None else deltas)
    base = 8.0 * epsilon ** 2 / (m ** 3 * (m - 1))
    if leading_order:
        pref = np.full(n_pairs(m), base)
    else:
        w = 2.0 * epsilon * _visibility(g, phases) / m
        pref = base / (1.0 - w ** 2)
    return _assemble(m, pref, phases, normalization=PER_PROJECTION, label="local_classical")


def fisher_local_quantum(m, epsilon, g, deltas=None, gamma_d=None, beta_d=None,
                         limit=False, regime_factor=10.0) -> FisherMatrix:
    """Local projections after distillation.

    ``limit=True`` returns ``4 eps^2 gamma^2 / (M^2 beta (1 - eps))``, the value
    approached when ``beta (1 - eps) >> eps gamma / M``. The ``regime`` flag
    records whether that separation holds by ``regime_factor``.
    """
    if gamma_d is None or beta_d is None:
        raise ValueError("local_quantum needs gamma_d and beta_d")
    g = as_coherence(m, g)
    phases = _pair_phases(m, deltas=np.zeros(m) if deltas is None else deltas)
    gm, bt, e = float(gamma_d), float(beta_d), float(epsilon)
    # relative slack so a schedule built to sit on the boundary still counts
    regime = bool(bt * (1.0 - e) >= regime_factor * e * gm / m * (1.0 - 1e-12)) if gm > 0 else False
    c = n_pairs(m)
    if gm == 0.0:
        pref = np.zeros(c)
    elif limit:
        pref = np.full(c, 4.0 * e ** 2 * gm ** 2 / (m ** 2 * bt * (1.0 - e)))
    else:
        s = e * gm / m
        u = _visibility(g, phases)
        pref = s ** 2 * (bt * (1.0 - e) + 2.0 * s) / ((0.5 * bt * (1.0 - e) + s) ** 2 - (s * u) ** 2)
    return _assemble(m, pref, phases, normalization=PER_PROJECTION, regime=regime, label="local_quantum")


def fisher_multipartite_frame(m, epsilon, g, deltas=None, exact=False) -> FisherMatrix:
    """``4 eps^2 / M^2`` blocks at leading order; ``exact`` sums the full distribution."""
    g = as_coherence(m, g)
    deltas = np.zeros(m) if deltas is None else np.asarray(deltas, dtype=float)
    phases = _pair_phases(m, deltas=deltas)
    if not exact:
        return _assemble(m, np.full(n_pairs(m), 4.0 * epsilon ** 2 / m ** 2), phases,
                         normalization=PER_PROJECTION, label="multipartite_frame")
    p = multipartite_frame_distribution(m, epsilon, g, deltas, validate=False).probabilities
    signs = _parity_signs(m)
    k = epsilon / (m * 2 ** (m - 1))
    grad = np.empty((p.size, 2 * n_pairs(m)))
    grad[:, 0::2] = k * signs * np.cos(phases)
    grad[:, 1::2] = k * signs * np.sin(phases)
    mat = (grad / p[:, None]).T @ grad
    return FisherMatrix(m, mat, normalization=PER_PROJECTION, label="multipartite_frame")


# ---------------------------------------------------------------- direct distributions


def wstate_distribution(m, epsilon, g, deltas=None, validate=True) -> OutcomeDistribution:
    """Pair outcomes ``eps/M^2 (1 +- u)``, single-site outcomes ``eps/M^2``, vacuum ``1 - eps``."""
    g = as_coherence(m, g)
    phases = _pair_phases(m, deltas=np.zeros(m) if deltas is None else deltas)
    u = _visibility(g, phases)
    labels, probs = [], []
    for pair, uk in zip(pairs(m), u):
        for tag, s in (("+", 1.0), ("-", -1.0)):
            labels.append(Outcome("pm", pair, tag))
            probs.append(epsilon / m ** 2 * (1.0 + s * uk))
    for i in range(m):
        labels.append(Outcome("single", None, telescope_name(i)))
        probs.append(epsilon / m ** 2)
    labels.append(Outcome("vacuum"))
    probs.append(1.0 - epsilon)
    dist = OutcomeDistribution(tuple(labels), np.array(probs))
    return dist.check() if validate else dist


def _parity_signs(m):
    """``(-1)^{alpha_X + alpha_Y}`` for every outcome vector (rows) and pair (columns)."""
    bits = np.array(list(itertools.product((0, 1), repeat=m)))
    return np.stack([(-1.0) ** (bits[:, i] + bits[:, j]) for i, j in pairs(m)], axis=1)


def multipartite_frame_distribution(m, epsilon, g, deltas=None, validate=True) -> OutcomeDistribution:
    g = as_coherence(m, g)
    phases = _pair_phases(m, deltas=np.zeros(m) if deltas is None else deltas)
    u = _visibility(g, phases)
    p = 1.0 / 2 ** m + epsilon / (m * 2 ** (m - 1)) * (_parity_signs(m) @ u)
    labels = tuple(
        Outcome("alpha", None, "".join(map(str, b))) for b in itertools.product((0, 1), repeat=m)
    )
    dist = OutcomeDistribution(labels, p)
    return dist.check() if validate else dist


# ---------------------------------------------------------------- numeric Fisher


def _probability_map(settings, m, epsilon, yields):
    scheme = settings.scheme
    if scheme is Scheme.W_STATE:
        d = settings.telescope_phases(m)
        return lambda g: wstate_distribution(m, epsilon, g, d, validate=False).probabilities
    if scheme is Scheme.MULTIPARTITE_FRAME:
        d = settings.telescope_phases(m)
        return lambda g: multipartite_frame_distribution(m, epsilon, g, d, validate=False).probabilities
    ops = build_povm(settings, m, yields).stacked()

    def probs(g):
        rho = TruncatedState(1.0 - epsilon, epsilon * single_photon_block(m, g)).to_operator()
        return np.einsum("kij,ji->k", ops, rho).real

    return probs


def fisher_numeric(settings: MeasurementSettings, m, epsilon, g, yields=None, step=1e-6) -> FisherMatrix:
    """``F_ij = sum_x dP_x/dc_i dP_x/dc_j / P_x`` by central differences.

    Outcomes with ``P < 1e-14`` are left out of the sum.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    if settings.scheme.needs_yield and yields is None:
        raise ValueError(f"{settings.scheme.value} needs a distillation yield")
    g = as_coherence(m, g)
    _check_physical(g)
    params = ParameterVector.from_coherence(g)
    probs = _probability_map(settings, m, epsilon, yields)
    p0 = probs(g)
    c = params.values
    grads = np.empty((p0.size, c.size))
    for i in range(c.size):
        h = step * max(1.0, abs(c[i]))
        up, dn = c.copy(), c.copy()
        up[i] += h
        dn[i] -= h
        grads[:, i] = (probs(ParameterVector(m, up).coherence())
                       - probs(ParameterVector(m, dn).coherence())) / (2.0 * h)
    keep = p0 >= P_FLOOR
    gk = grads[keep]
    mat = (gk / p0[keep, None]).T @ gk
    mat = 0.5 * (mat + mat.T)
    local = settings.scheme in (Scheme.LOCAL_CLASSICAL, Scheme.LOCAL_QUANTUM, Scheme.MULTIPARTITE_FRAME)
    return FisherMatrix(m, mat, normalization=PER_PROJECTION if local else PER_PHOTON,
                        label=f"{settings.scheme.value}:numeric")


def fisher_closed_form(settings: MeasurementSettings, m, epsilon, g, yields=None, **kw) -> FisherMatrix:
    """Dispatch to the closed form matching ``settings.scheme``."""
    s = settings.scheme
    d = settings.telescope_phases(m)
    if s is Scheme.GJC_CLASSICAL:
        return fisher_gjc_classical(m, epsilon, g, settings)
    if s is Scheme.GJC_QUANTUM:
        if yields is None:
            raise ValueError("gjc_quantum needs a distillation yield")
        return fisher_gjc_quantum(m, epsilon, g, settings, gamma_d=yields.gamma_d)
    if s is Scheme.ALL_PAIRS_BIPARTITE:
        return fisher_all_pairs_bipartite(m, epsilon, g, settings)
    if s is Scheme.LOCAL_CLASSICAL:
        return fisher_local_classical(m, epsilon, g, d, **kw)
    if s is Scheme.LOCAL_QUANTUM:
        if yields is None:
            raise ValueError("local_quantum needs a distillation yield")
        return fisher_local_quantum(m, epsilon, g, d, yields.gamma_d, yields.beta_d, **kw)
    if s is Scheme.W_STATE:
        return fisher_wstate(m, epsilon, g, d)
    return fisher_multipartite_frame(m, epsilon, g, d, **kw)


def scheme_ratio(f1: FisherMatrix, f2: FisherMatrix) -> SchemeRatio:
    """Scalar ``r`` with ``f1 = r f2``; refuses inputs that are not proportional."""
    if f1.matrix.shape != f2.matrix.shape:
        raise ValueError("Fisher matrices have different pair structure")
    a, b = f1.matrix, f2.matrix
    nb = float(np.linalg.norm(b))
    na = float(np.linalg.norm(a))
    if nb == 0.0 or na == 0.0 or not (np.isfinite(na) and np.isfinite(nb)):
        raise ValueError("ratio undefined for zero or non-finite Fisher matrices")
    fit = float(np.sum(a * b)) / nb ** 2
    residual = float(np.linalg.norm(a - fit * b)) / na
    if residual >= PROPORTIONALITY_TOL:
        raise ValueError(f"Fisher matrices are not proportional (residual {residual:.3g})")
    return SchemeRatio(f1.label, f2.label, na / nb, residual)


__all__ = [
    "ParameterVector",
    "FisherMatrix",
    "SchemeRatio",
    "fisher_numeric",
    "fisher_closed_form",
    "fisher_gjc_classical",
    "fisher_gjc_quantum",
    "fisher_all_pairs_bipartite",
    "fisher_local_classical",
    "fisher_local_quantum",
    "fisher_wstate",
    "fisher_multipartite_frame",
    "wstate_distribution",
    "multipartite_frame_distribution",
    "scheme_ratio",
    "FAILURE",
]
