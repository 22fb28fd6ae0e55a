"""POVM families for every measurement scheme, written on the truncated space.

Operators act on the ``M + 1`` dimensional space ``{|0...0>, |e_1>, ..., |e_M>}``.
Multi-mode operators are built as ``op_S (x) r_rest`` and then compressed to
that space (see :func:`compress_operator`). Every builder appends the
computed complement ``I - sum(E)`` as a ``failure`` element.
"""

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .kraus import ancilla_circuit_check, weak_kraus  # noqa: F401  (re-exported)
from .state import (
    HERMITIAN_TOL,
    PSD_TOL,
    n_pairs,
    pair_name,
    pairs,
    parse_pair,
)

__all__ = [
    "Scheme",
    "MeasurementSettings",
    "Outcome",
    "PovmElement",
    "PovmSet",
    "OutcomeDistribution",
    "weak_kraus",
    "ancilla_circuit_check",
    "compress_operator",
    "delta_state",
    "local_basis_state",
    "build_povm",
    "born_distribution",
]


class Scheme(enum.Enum):
    GJC_CLASSICAL = "gjc_classical"
    GJC_QUANTUM = "gjc_quantum"
    LOCAL_CLASSICAL = "local_classical"
    LOCAL_QUANTUM = "local_quantum"
    ALL_PAIRS_BIPARTITE = "all_pairs_bipartite"
    W_STATE = "w_state"
    MULTIPARTITE_FRAME = "multipartite_frame"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "gjcclassical": "gjc_classical",
            "gjcquantum": "gjc_quantum",
            "localclassical": "local_classical",
            "localquantum": "local_quantum",
            "allpairsbipartite": "all_pairs_bipartite",
            "wstate": "w_state",
            "multipartiteframe": "multipartite_frame",
        }
        key = aliases.get(key.replace("_", ""), key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {value!r}; expected one of {names}") from None

    @property
    def needs_yield(self):
        return self in (Scheme.GJC_QUANTUM, Scheme.LOCAL_QUANTUM)

    @property
    def pair_phased(self):
        """True for schemes whose phase is set per pair rather than per telescope."""
        return self in (Scheme.GJC_CLASSICAL, Scheme.GJC_QUANTUM, Scheme.ALL_PAIRS_BIPARTITE)


@dataclass(frozen=True)
class MeasurementSettings:
    """Scheme choice plus its phase settings.

    Pair-phased schemes use ``delta`` for every pair unless ``pair_deltas``
    overrides it. The remaining schemes use per-telescope phases and the pair
    phase ``delta_X - delta_Y``.
    """

    scheme: Scheme
    delta: float = 0.0
    pair_deltas: Optional[Mapping] = None
    telescope_deltas: Optional[Sequence[float]] = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")
        if self.telescope_deltas is not None:
            t = tuple(float(v) for v in self.telescope_deltas)
            if not all(np.isfinite(t)):
                raise ValueError("telescope phases must be finite")
            object.__setattr__(self, "telescope_deltas", t)
        if self.pair_deltas is not None:
            if not all(np.isfinite(float(v)) for v in self.pair_deltas.values()):
                raise ValueError("pair phases must be finite")

    def telescope_phases(self, m):
        if self.telescope_deltas is None:
            return np.zeros(m)
        if len(self.telescope_deltas) != m:
            raise ValueError(
                f"{len(self.telescope_deltas)} telescope phases given for m={m}"
            )
        return np.array(self.telescope_deltas)

    def pair_phase(self, m, pair):
        i, j = pair
        if self.scheme.pair_phased:
            if self.pair_deltas:
                for key, value in self.pair_deltas.items():
                    if parse_pair(m, key) == (i, j):
                        return float(value)
            return float(self.delta)
        d = self.telescope_phases(m)
        return float(d[i] - d[j])

    def pair_phases(self, m):
        return np.array([self.pair_phase(m, p) for p in pairs(m)])


@dataclass(frozen=True)
class Outcome:
    """Structured outcome label; ``pair`` is ``None`` for the failure element."""

    kind: str
    pair: Optional[tuple] = None
    value: object = None

    def __str__(self):
        if self.pair is None:
            return self.kind if self.value is None else f"{self.kind}:{self.value}"
        head = pair_name(self.pair)
        if self.value is None:
            return f"{head}:{self.kind}"
        if isinstance(self.value, tuple):
            return f"{head}:{self.kind}={''.join(str(v) for v in self.value)}"
        return f"{head}:{self.kind}{self.value}"


FAILURE = Outcome("failure")


@dataclass(frozen=True)
class PovmElement:
    label: Outcome
    operator: np.ndarray
    informative: bool = True

    def __post_init__(self):
        op = np.array(self.operator, dtype=complex)
        op.setflags(write=False)
        object.__setattr__(self, "operator", op)


@dataclass(frozen=True)
class PovmSet:
    scheme: Scheme
    m: int
    elements: tuple

    @property
    def labels(self):
        return tuple(e.label for e in self.elements)

    @property
    def dim(self):
        return self.m + 1

    def stacked(self):
        return np.stack([e.operator for e in self.elements])

    def completeness_residual(self):
        return float(np.max(np.abs(self.stacked().sum(axis=0) - np.eye(self.dim))))

    def min_eigenvalue(self):
        return min(float(np.linalg.eigvalsh(e.operator)[0]) for e in self.elements)

    def hermiticity_residual(self):
        ops = self.stacked()
        return float(np.max(np.abs(ops - np.conj(np.transpose(ops, (0, 2, 1))))))

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, label):
        for e in self.elements:
            if e.label == label or str(e.label) == label:
                return e
        raise KeyError(label)


@dataclass(frozen=True)
class OutcomeDistribution:
    labels: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __getitem__(self, label):
        for lab, p in zip(self.labels, self.probabilities):
            if lab == label or str(lab) == label:
                return float(p)
        raise KeyError(label)

    def __len__(self):
        return len(self.labels)

    def as_dict(self):
        return {str(k): float(v) for k, v in zip(self.labels, self.probabilities)}

    @property
    def total(self):
        return float(self.probabilities.sum())

    def check(self, neg_tol=1e-12, sum_tol=1e-10):
        if np.any(self.probabilities < -neg_tol):
            raise ValueError(f"negative probability {self.probabilities.min():.3g}")
        if abs(self.total - 1.0) > sum_tol:
            raise ValueError(f"probabilities sum to {self.total:.15g}")
        return self


# ---------------------------------------------------------------- operator plumbing

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
VACUUM_PROJ = np.diag([1.0, 0.0]).astype(complex)
IDENTITY2 = np.eye(2, dtype=complex)


def _occupation(m, k):
    n = np.zeros(m, dtype=int)
    if k > 0:
        n[k - 1] = 1
    return n


def compress_operator(m, support, op_support, rest=IDENTITY2):
    """Matrix of ``op_support (x) rest^{(x) others}`` on the truncated basis.

    ``support`` lists the telescopes ``op_support`` acts on (first one most
    significant in its local index); ``rest`` is either one 2x2 operator used
    for every other telescope or a mapping from telescope to 2x2 operator.
    """
    support = tuple(support)
    op_support = np.asarray(op_support, dtype=complex)
    if op_support.shape != (2 ** len(support),) * 2:
        raise ValueError("support operator has the wrong dimension")
    others = [k for k in range(m) if k not in support]
    rest_ops = {k: (rest[k] if isinstance(rest, Mapping) else rest) for k in others}
    occ = [_occupation(m, k) for k in range(m + 1)]

    def local_index(n):
        idx = 0
        for t in support:
            idx = (idx << 1) | int(n[t])
        return idx

    out = np.zeros((m + 1, m + 1), dtype=complex)
    for a in range(m + 1):
        for b in range(m + 1):
            v = op_support[local_index(occ[a]), local_index(occ[b])]
            if v == 0:
                continue
            for k in others:
                v *= rest_ops[k][occ[a][k], occ[b][k]]
            out[a, b] = v
    return out


def delta_state(delta, sign):
    """``(|01> + sign * e^{i delta} |10>) / sqrt(2)`` on two modes ``(X, Y)``."""
    psi = np.zeros(4, dtype=complex)
    psi[0b01] = 1.0
    psi[0b10] = sign * np.exp(1j * delta)
    return psi / np.sqrt(2.0)


def local_basis_state(delta, alpha):
    """``(|0> + (-1)^alpha e^{i delta} |1>) / sqrt(2)``."""
    return (KET0 + (-1) ** alpha * np.exp(1j * delta) * KET1) / np.sqrt(2.0)


def _proj(v):
    return np.outer(v, np.conj(v))


def _two_mode_basis(nx, ny):
    v = np.zeros(4, dtype=complex)
    v[2 * nx + ny] = 1.0
    return v


def _with_complement(scheme, m, elements):
    total = sum(e.operator for e in elements)
    comp = np.eye(m + 1, dtype=complex) - total
    comp = 0.5 * (comp + comp.conj().T)
    lowest = float(np.linalg.eigvalsh(comp)[0])
    if lowest < -PSD_TOL:
        raise ValueError(
            f"{scheme.value}: informative elements exceed the identity "
            f"(complement eigenvalue {lowest:.3g}); check the yield values"
        )
    return PovmSet(scheme, m, tuple(elements) + (PovmElement(FAILURE, comp, False),))


# ---------------------------------------------------------------- builders


def _gjc_classical(settings, m):
    c = n_pairs(m)
    elements = []
    for pair in pairs(m):
        d = settings.pair_phase(m, pair)
        parts = [
            ("vac", 1.0 / c, _proj(_two_mode_basis(0, 0)), False),
            ("01", 0.5 / c, _proj(_two_mode_basis(0, 1)), False),
            ("10", 0.5 / c, _proj(_two_mode_basis(1, 0)), False),
            ("+", 0.5 / c, _proj(delta_state(d, +1)), True),
            ("-", 0.5 / c, _proj(delta_state(d, -1)), True),
        ]
        for tag, w, op, informative in parts:
            kind, value = ("pm", tag) if tag in "+-" else (tag, None)
            elements.append(
                PovmElement(Outcome(kind, pair, value), w * compress_operator(m, pair, op), informative)
            )
    return _with_complement(Scheme.GJC_CLASSICAL, m, elements)


def _gjc_projected(scheme, settings, m, weight):
    """``(weight / 2) |delta+-><delta+-|_XY (x) |0...0><0...0|`` for every pair."""
    elements = []
    for pair in pairs(m):
        d = settings.pair_phase(m, pair)
        for sign, tag in ((+1, "+"), (-1, "-")):
            op = 0.5 * weight * compress_operator(m, pair, _proj(delta_state(d, sign)), VACUUM_PROJ)
            elements.append(PovmElement(Outcome("pm", pair, tag), op))
    return _with_complement(scheme, m, elements)


def _local_classical(settings, m):
    c = n_pairs(m)
    phases = settings.telescope_phases(m)
    elements = []
    for pair in pairs(m):
        x, y = pair
        for ax in (0, 1):
            for ay in (0, 1):
                op = np.kron(
                    _proj(local_basis_state(phases[x], ax)),
                    _proj(local_basis_state(phases[y], ay)),
                )
                elements.append(
                    PovmElement(Outcome("alpha", pair, (ax, ay)), compress_operator(m, pair, op) / c)
                )
    return _with_complement(Scheme.LOCAL_CLASSICAL, m, elements)


def _local_quantum(settings, m, gamma_d, beta_d):
    phases = settings.telescope_phases(m)
    vac = np.zeros((m + 1, m + 1), dtype=complex)
    vac[0, 0] = 1.0
    elements = []
    for pair in pairs(m):
        x, y = pair
        d = phases[x] - phases[y]
        for ax in (0, 1):
            for ay in (0, 1):
                sign = (-1) ** (ax + ay)
                psi = compress_operator(m, pair, _proj(delta_state(d, sign)), VACUUM_PROJ)
                op = 0.25 * beta_d * vac + 0.5 * gamma_d * psi
                elements.append(PovmElement(Outcome("alpha", pair, (ax, ay)), op))
    return _with_complement(Scheme.LOCAL_QUANTUM, m, elements)


def build_povm(settings: MeasurementSettings, m, yields=None) -> PovmSet:
    """POVM (informative elements plus complement) of a measurement scheme.

    ``yields`` is a :class:`~telescopy.distillation.DistillationYield` (or any
    object with ``gamma_d``/``beta_d``) and is required for the two
    quantum-randomness schemes.
    """
    scheme = settings.scheme
    if m < 2:
        raise ValueError(f"need at least two telescopes, got m={m}")
    if scheme.needs_yield and yields is None:
        raise ValueError(f"{scheme.value} needs a distillation yield")
    if scheme is Scheme.GJC_CLASSICAL:
        return _gjc_classical(settings, m)
    if scheme is Scheme.GJC_QUANTUM:
        return _gjc_projected(scheme, settings, m, float(yields.gamma_d))
    if scheme is Scheme.ALL_PAIRS_BIPARTITE:
        if m % 2:
            raise ValueError(f"all-pairs bipartite distribution needs even m, got m={m}")
        return _gjc_projected(scheme, settings, m, 1.0 / (m - 1))
    if scheme is Scheme.LOCAL_CLASSICAL:
        return _local_classical(settings, m)
    if scheme is Scheme.LOCAL_QUANTUM:
        return _local_quantum(settings, m, float(yields.gamma_d), float(yields.beta_d))
    raise ValueError(
        f"{scheme.value} has no POVM builder; use fisher.wstate_distribution or "
        f"fisher.multipartite_frame_distribution"
    )


def born_distribution(povm: PovmSet, state, validate=True) -> OutcomeDistribution:
    """``p(label) = tr(E_label rho)`` for every element of ``povm``."""
    rho = state.to_operator() if hasattr(state, "to_operator") else np.asarray(state)
    if rho.shape != (povm.dim, povm.dim):
        raise ValueError(f"state dimension {rho.shape} does not match POVM dimension {povm.dim}")
    p = np.einsum("kij,ji->k", povm.stacked(), rho).real
    dist = OutcomeDistribution(povm.labels, p)
    return dist.check() if validate else dist


def is_hermitian(op, tol=HERMITIAN_TOL):
    return float(np.max(np.abs(op - op.conj().T))) <= tol
