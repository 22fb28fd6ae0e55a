"""Random-party distillation yields and schedule optimization.

A schedule of weak-measurement strengths ``tau_r`` is applied round by round at
every telescope. The survival product ``x_r = prod_{j<=r} (1 - tau_j)`` drives
everything: the weight with which round ``r`` localizes the photon onto one
given pair is ``gamma_{D,r} = x_r [(1 - x_r)^{M-2} - (1 - x_{r-1})^{M-2}]`` and the
matching vacuum weight is ``beta_{D,r} = gamma_{D,r} x_r``.

``HARD_FINAL`` replaces the last weak round by a uniformly random pair
assignment among the telescopes that still carry the photon amplitude.
"""

import enum
from dataclasses import dataclass, field
from math import comb
from typing import Tuple

import numpy as np

from . import optim

TAU_LO = 1e-6
TAU_HI = 1.0 - 1e-6
N_STARTS = 8
XTOL = 1e-10
FTOL = 1e-12
DEFAULT_BUDGET = 50_000_000
REGIME_FACTOR = 10.0


class Variant(enum.Enum):
    PURE_WEAK = "pure_weak"
    HARD_FINAL = "hard_final"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        key = {"pureweak": "pure_weak", "hardfinal": "hard_final"}.get(key.replace("_", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown variant {value!r}; expected pure_weak or hard_final") from None


@dataclass(frozen=True)
class TauSchedule:
    """Weak-measurement strengths, one per weak round.

    For ``HARD_FINAL`` a protocol of depth ``D`` carries ``D - 1`` weak strengths;
    the last round is the hard random-pair assignment.
    """

    taus: Tuple[float, ...]
    variant: Variant = Variant.PURE_WEAK

    def __post_init__(self):
        variant = Variant.parse(self.variant)
        taus = tuple(float(t) for t in self.taus)
        for t in taus:
            if not (0.0 < t < 1.0):
                raise ValueError(f"tau values must lie strictly inside (0, 1), got {t}")
        if variant is Variant.PURE_WEAK and not taus:
            raise ValueError("a pure-weak schedule needs at least one round")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "variant", variant)

    @property
    def depth(self):
        return len(self.taus) + (1 if self.variant is Variant.HARD_FINAL else 0)

    def as_array(self):
        return np.array(self.taus, dtype=float)


@dataclass(frozen=True)
class DistillationYield:
    m: int
    x: np.ndarray
    gamma_terms: np.ndarray
    beta_terms: np.ndarray
    gamma_fallback: float = 0.0
    beta_fallback: float = 0.0

    @property
    def gamma_d(self):
        return float(self.gamma_terms.sum() + self.gamma_fallback)

    @property
    def beta_d(self):
        return float(self.beta_terms.sum() + self.beta_fallback)

    @property
    def omega(self):
        """Weak-round part of ``gamma_d`` (without any hard-final fallback)."""
        return float(self.gamma_terms.sum())

    @property
    def x_final(self):
        return float(self.x[-1]) if self.x.size else 1.0

    def identity_residual(self):
        """``|sum_r gamma_{D,r} / x_r - (1 - x_D)^{M-2}|`` over the weak rounds."""
        if not self.x.size:
            return 0.0
        lhs = float(np.sum(self.gamma_terms / self.x))
        return abs(lhs - (1.0 - self.x_final) ** (self.m - 2))


def _fallback(m, x):
    """Hard random-pair assignment after the weak rounds left survival ``x``.

    With ``j`` of the other ``M - 2`` telescopes still un-heralded, the
    given pair is among ``j + 2`` candidates and is drawn with probability
    ``1 / C(j+2, 2)``. The ``j = 0`` term would mean the pair was already
    isolated by the weak rounds, which the recursion has counted.
    """
    g = b = 0.0
    for j in range(1, m - 1):
        w = comb(m - 2, j) * x ** (j + 1) * (1.0 - x) ** (m - 2 - j) / comb(j + 2, 2)
        g += w
        b += w * x
    return g, b


def yields(m, schedule: TauSchedule) -> DistillationYield:
    if m < 2:
        raise ValueError(f"need at least two telescopes, got m={m}")
    if not isinstance(schedule, TauSchedule):
        schedule = TauSchedule(tuple(schedule))
    taus = schedule.as_array()
    if m == 2:
        # the only pair is already isolated; the vacuum survives untouched
        one = np.ones(1)
        return DistillationYield(m, one, one.copy(), one.copy())
    x = np.cumprod(1.0 - taus)
    x_prev = np.concatenate(([1.0], x[:-1]))
    p = m - 2
    gamma_terms = x * ((1.0 - x) ** p - (1.0 - x_prev) ** p)
    beta_terms = gamma_terms * x
    gf = bf = 0.0
    if schedule.variant is Variant.HARD_FINAL:
        gf, bf = _fallback(m, float(x[-1]) if x.size else 1.0)
    return DistillationYield(m, x, gamma_terms, beta_terms, gf, bf)


def ansatz_schedule(d) -> TauSchedule:
    """``tau_r = 1 / (2 + D - r)``."""
    if d < 1:
        raise ValueError(f"need at least one round, got d={d}")
    return TauSchedule(tuple(1.0 / (2 + d - r) for r in range(1, d + 1)))


def closed_form_m3(d, variant=Variant.PURE_WEAK):
    variant = Variant.parse(variant)
    if variant is Variant.PURE_WEAK:
        return d / (2.0 * (1.0 + d))
    return (d + 1.0) / (2.0 * (d + 2.0))


def single_round_gamma(m, tau):
    x = 1.0 - tau
    return x * (1.0 - x) ** (m - 2)


# ---------------------------------------------------------------- optimization


@dataclass(frozen=True)
class OptimizationReport:
    schedule: TauSchedule
    objective: float
    recomputed: float
    iterations: int
    evaluations: int
    seeds: Tuple[int, ...]
    converged: bool
    yields: DistillationYield
    best_start: int
    start_objectives: Tuple[float, ...] = field(default=())

    @property
    def gamma_d(self):
        return self.yields.gamma_d

    @property
    def beta_d(self):
        return self.yields.beta_d


def _starts(n_taus, seed, n_starts):
    """Start 0 is the ansatz shape; the rest are random from per-start child seeds."""
    children = np.random.SeedSequence(seed).spawn(n_starts)
    seeds = tuple(int(c.generate_state(1)[0]) for c in children)
    out = []
    base = np.array([1.0 / (2 + n_taus - r) for r in range(1, n_taus + 1)])
    out.append(np.clip(base, TAU_LO, TAU_HI))
    for c in children[1:]:
        out.append(np.random.default_rng(c).uniform(0.05, 0.95, size=n_taus))
    return out, seeds


def _run(kind, m, n_taus, budget, seed, eps=0.0, factor=REGIME_FACTOR, n_starts=N_STARTS):
    starts, seeds = _starts(n_taus, seed, n_starts)
    per_start = max(1, int(budget) // n_starts)
    results = []
    for k, t0 in enumerate(starts):
        t = np.ascontiguousarray(t0, dtype=float)
        best, sweeps, evals, conv = optim.coordinate_ascent(
            kind, m, t, TAU_LO, TAU_HI, XTOL, FTOL, per_start, float(eps), float(factor)
        )
        results.append((float(best), k, t, int(sweeps), int(evals), bool(conv)))
    # deterministic merge: highest objective, ties to the lowest start index
    best = max(results, key=lambda r: (r[0], -r[1]))
    return best, results, seeds


def optimize_gamma(m, d, variant=Variant.PURE_WEAK, budget=DEFAULT_BUDGET, seed=0,
                   n_starts=N_STARTS) -> OptimizationReport:
    """Maximize ``gamma_D`` over the schedule by multistart coordinate ascent."""
    variant = Variant.parse(variant)
    if m < 3:
        raise ValueError(f"optimization needs m >= 3, got m={m}")
    if d < 1:
        raise ValueError(f"need at least one round, got d={d}")
    hard = variant is Variant.HARD_FINAL
    n_taus = d - 1 if hard else d
    kind = optim.GAMMA_HARD if hard else optim.GAMMA_PURE
    (obj, k, taus, _, _, _), results, seeds = _run(kind, m, n_taus, budget, seed, n_starts=n_starts)
    schedule = TauSchedule(tuple(taus), variant)
    y = yields(m, schedule)
    return OptimizationReport(
        schedule=schedule,
        objective=obj,
        recomputed=y.gamma_d,
        iterations=sum(r[3] for r in results),
        evaluations=sum(r[4] for r in results),
        seeds=seeds,
        converged=all(r[5] for r in results),
        yields=y,
        best_start=k,
        start_objectives=tuple(r[0] for r in results),
    )


def regime_holds(m, epsilon, gamma_d, beta_d, factor=REGIME_FACTOR):
    """``beta_D (1 - eps) >= factor * eps * gamma_D / M``."""
    return beta_d * (1.0 - epsilon) >= factor * epsilon * gamma_d / m * (1.0 - 1e-12)


def optimize_local_objective(m, d, epsilon, budget=DEFAULT_BUDGET, seed=0,
                             regime_factor=REGIME_FACTOR, n_starts=N_STARTS) -> OptimizationReport:
    """Maximize ``gamma_D^2 / beta_D`` inside the leading-order regime."""
    if m < 3:
        raise ValueError(f"optimization needs m >= 3, got m={m}")
    if d < 1:
        raise ValueError(f"need at least one round, got d={d}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    (obj, k, taus, _, _, _), results, seeds = _run(
        optim.LOCAL_RATIO, m, d, budget, seed, eps=epsilon, factor=regime_factor, n_starts=n_starts
    )
    if obj < 0.0:
        raise ValueError(
            f"no schedule satisfies beta_D (1 - eps) >= {regime_factor} eps gamma_D / m "
            f"at eps={epsilon}, m={m}, d={d}"
        )
    schedule = TauSchedule(tuple(taus))
    y = yields(m, schedule)
    return OptimizationReport(
        schedule=schedule,
        objective=obj,
        recomputed=y.gamma_d ** 2 / y.beta_d,
        iterations=sum(r[3] for r in results),
        evaluations=sum(r[4] for r in results),
        seeds=seeds,
        converged=all(r[5] for r in results),
        yields=y,
        best_start=k,
        start_objectives=tuple(r[0] for r in results),
    )


def local_single_round_optimum(m, epsilon, regime_factor=REGIME_FACTOR):
    """Largest ``tau`` (hence largest ``gamma^2 / beta = tau^{M-2}``) allowed by the regime.

    One round gives ``beta / gamma = 1 - tau``, so the constraint reads
    ``(1 - tau)(1 - eps) >= factor * eps / M``.
    """
    tau = 1.0 - regime_factor * epsilon / (m * (1.0 - epsilon))
    if not 0.0 < tau < 1.0:
        raise ValueError(f"regime cannot be met at eps={epsilon}, m={m}")
    return tau
