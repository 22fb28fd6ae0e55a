"""Trajectory sampler for the distillation protocol and the measurement schemes.

This module is the stochastic cross-check of the analytic code. It works with
the instruments themselves: round outcomes are drawn from the Born rule
with the squared Kraus diagonals of :func:`telescopy.kraus.weak_kraus`, and
final measurements use projectors assembled with ``np.kron`` on the full
``2**M`` dimensional Fock space of ``M`` modes (each truncated to one photon).
Nothing here calls the yield recursion or the POVM builders.

Randomness is drawn per fixed-size chunk of trajectories from a Philox
stream keyed by ``(seed, stream, chunk)``, so results do not depend on how
chunks are spread over threads.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Dict, Optional, Tuple

import numpy as np
from numba import njit

from .distillation import TauSchedule, Variant
from .kraus import weak_kraus
from .povm import FAILURE, MeasurementSettings, Outcome, OutcomeDistribution, Scheme
from .state import (
    CoherenceSet,
    TruncatedState,
    build_stellar_state,
    n_pairs,
    pairs,
)

CHUNK = 1 << 16
FAILED = -1
SURVIVED = -2
IMPOSSIBLE = 1e-300

STREAM_DISTILL = 0
STREAM_SCHEME = 1
STREAM_VACUUM = 2


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    n: int
    seed: int

    @classmethod
    def from_count(cls, k, n, seed):
        p = k / n
        var = p * (1.0 - p) * (n / (n - 1) if n > 1 else 1.0)
        return cls(float(p), float(np.sqrt(var / n)), int(n), int(seed))

    def within(self, value, k=4.0):
        """``|mean - value| <= k`` binomial standard errors evaluated at ``value``."""
        se = np.sqrt(max(value * (1.0 - value), 0.0) / self.n)
        return abs(self.mean - value) <= k * se


@dataclass(frozen=True)
class TrajectoryRecord:
    bits: np.ndarray
    status: str
    pair: Optional[Tuple[int, int]]
    round: int
    state: Optional[TruncatedState]


@dataclass(frozen=True)
class DistillationEstimate:
    pairs: Dict[Tuple[int, int], EstimatorResult]
    coincidence: EstimatorResult
    failure: EstimatorResult
    survived: EstimatorResult
    records: Tuple[TrajectoryRecord, ...] = field(default=())

    def __getitem__(self, pair):
        return self.pairs[tuple(sorted(pair))]


@dataclass(frozen=True)
class EmpiricalDistribution:
    labels: tuple
    counts: np.ndarray
    n: int
    seed: int

    @property
    def frequencies(self):
        return self.counts / self.n

    def distribution(self):
        return OutcomeDistribution(self.labels, self.frequencies)

    def count(self, label):
        for lab, c in zip(self.labels, self.counts):
            if lab == label or str(lab) == label:
                return int(c)
        raise KeyError(label)

    def compare(self, analytic: OutcomeDistribution, k=4.0):
        """Per-label ``(label, p, frequency, z)``; also returns whether all ``|z| <= k``.

        Outcomes with ``p`` numerically zero must never be observed.
        """
        freq = dict(zip(map(str, self.labels), self.frequencies))
        rows, ok = [], True
        for lab, p in zip(analytic.labels, analytic.probabilities):
            f = freq.get(str(lab), 0.0)
            p = min(max(float(p), 0.0), 1.0)
            se = np.sqrt(p * (1.0 - p) / self.n)
            if se < 1e-15:
                z = 0.0 if abs(f - p) < 1e-12 else np.inf
            else:
                z = (f - p) / se
            ok &= abs(z) <= k
            rows.append((lab, p, f, z))
        extra = set(freq) - set(map(str, analytic.labels))
        if any(freq[e] > 0 for e in extra):
            ok = False
        return rows, bool(ok)


# ---------------------------------------------------------------- rng


def _chunk_uniforms(seed, stream, chunk, n, width):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(chunk)))
    return np.random.Generator(np.random.Philox(ss)).random((n, width))


def _chunks(n, size=CHUNK):
    out, start, k = [], 0, 0
    while start < n:
        out.append((k, start, min(size, n - start)))
        start += size
        k += 1
    return out


def _map_chunks(fn, n, threads):
    jobs = _chunks(n)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


# ---------------------------------------------------------------- distillation kernel


def _squared_diagonals(tau):
    """``q[b, n] = |<n| M_b |n>|^2`` for outcome ``b`` and local occupation ``n``."""
    m0, m1 = weak_kraus(tau)
    return np.array([np.abs(np.diag(m0)) ** 2, np.abs(np.diag(m1)) ** 2])


@njit(cache=True)
def _pair_index(m, i, j):
    return i * (2 * m - i - 1) // 2 + (j - i - 1)


@njit(cache=True)
def _distill_kernel(q, q_idle, w0, u, hard_final, n_rec):
    n, m1 = u.shape[0], w0.shape[0]
    m = m1 - 1
    rounds = q.shape[0]
    n_out = 1 << m
    status = np.empty(n, np.int32)
    last = np.zeros(n, np.int32)
    factors = np.empty((n, m1))
    bits_rec = np.zeros((max(n_rec, 1), max(rounds, 1), m), np.int8)
    bad = 0
    qs = np.empty((m, 2, 2))
    for t in range(n):
        c = np.ones(m1)
        active = np.ones(m, np.bool_)
        n_active = m
        st = SURVIVED
        for r in range(rounds):
            for k in range(m):
                for b in range(2):
                    for o in range(2):
                        qs[k, b, o] = q[r, b, o] if active[k] else q_idle[b, o]
            total = 0.0
            for i in range(m1):
                total += c[i] * w0[i]
            target = u[t, r] * total
            acc = 0.0
            chosen = -1
            p_chosen = 0.0
            for idx in range(n_out):
                # vacuum branch and single-photon branches for outcome vector idx
                pv = 1.0
                for k in range(m):
                    pv *= qs[k, (idx >> (m - 1 - k)) & 1, 0]
                p = c[0] * w0[0] * pv
                for j in range(m):
                    bj = (idx >> (m - 1 - j)) & 1
                    if w0[j + 1] == 0.0 or c[j + 1] == 0.0:
                        continue
                    den = qs[j, bj, 0]
                    if den == 0.0:
                        # only possible for idle sites (tau = 0), where M1 vanishes
                        continue
                    p += c[j + 1] * w0[j + 1] * pv * qs[j, bj, 1] / den
                if p > 0.0:
                    chosen = idx
                    p_chosen = p
                acc += p
                if acc >= target and p > 0.0:
                    break
            if chosen < 0 or p_chosen < IMPOSSIBLE * total:
                bad += 1
                st = FAILED
                break
            # Kraus update of every branch weight
            for i in range(m1):
                f = 1.0
                for k in range(m):
                    bk = (chosen >> (m - 1 - k)) & 1
                    f *= qs[k, bk, 1 if i == k + 1 else 0]
                c[i] *= f
            for k in range(m):
                if (chosen >> (m - 1 - k)) & 1:
                    if t < n_rec:
                        bits_rec[t, r, k] = 1
                    if active[k]:
                        active[k] = False
                        n_active -= 1
            last[t] = r + 1
            if n_active == 2:
                i0 = -1
                for k in range(m):
                    if active[k]:
                        if i0 < 0:
                            i0 = k
                        else:
                            st = _pair_index(m, i0, k)
                break
            if n_active < 2:
                st = FAILED
                break
        if st == SURVIVED and hard_final:
            # uniform pair among the telescopes still in play
            n_pairs_active = n_active * (n_active - 1) // 2
            pick = int(u[t, rounds] * n_pairs_active)
            if pick >= n_pairs_active:
                pick = n_pairs_active - 1
            counter = 0
            for i in range(m):
                if not active[i]:
                    continue
                for j in range(i + 1, m):
                    if not active[j]:
                        continue
                    if counter == pick:
                        st = _pair_index(m, i, j)
                    counter += 1
            last[t] = rounds + 1
        status[t] = st
        for i in range(m1):
            factors[t, i] = c[i]
    return status, last, factors, bits_rec, bad


def _input_operator(m, epsilon, g, source, photon_at):
    if source == "vacuum":
        return TruncatedState.vacuum_state(m).to_operator()
    if source == "photon":
        return TruncatedState.photon_at(m, photon_at).to_operator()
    if source == "stellar":
        return build_stellar_state(m, epsilon, g).to_operator()
    raise ValueError(f"unknown input {source!r}; expected stellar, vacuum or photon")


def _run_distillation(m, rho, schedule, n, seed, stream, threads, n_rec):
    taus = np.array(schedule.taus)
    q = np.array([_squared_diagonals(t) for t in taus]).reshape(len(taus), 2, 2)
    q_idle = _squared_diagonals(0.0)
    w0 = np.ascontiguousarray(np.diag(rho).real)
    hard = schedule.variant is Variant.HARD_FINAL
    width = len(taus) + 1

    def job(chunk):
        k, _, size = chunk
        u = _chunk_uniforms(seed, stream, k, size, width + 4)
        out = _distill_kernel(q, q_idle, w0, np.ascontiguousarray(u[:, :width]), hard,
                              n_rec if k == 0 else 0)
        return out + (u[:, width:],)

    return _map_chunks(job, n, threads)


def _post_state(rho, factors):
    s = np.sqrt(factors)
    op = s[:, None] * rho * s[None, :]
    return op / np.trace(op).real


def simulate_distillation(m, epsilon, g, schedule: TauSchedule, n, seed=0, source="stellar",
                          photon_at=0, threads=1, records=0, _stream=STREAM_DISTILL) -> DistillationEstimate:
    """Run ``n`` protocol trajectories and estimate per-pair collapse frequencies.

    ``source`` selects the input: the stellar state, the vacuum (estimates
    ``beta_D`` per pair) or one photon at ``photon_at`` (estimates ``gamma_D``
    for pairs containing that telescope).
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    if not isinstance(schedule, TauSchedule):
        schedule = TauSchedule(tuple(schedule))
    g = g if isinstance(g, CoherenceSet) or source != "stellar" else CoherenceSet.uniform(m, g)
    rho = _input_operator(m, epsilon, g, source, photon_at)
    results = _run_distillation(m, rho, schedule, n, seed, _stream, threads, records)
    if sum(r[4] for r in results):
        raise RuntimeError("sampled an outcome with vanishing probability; truncation is broken")
    status = np.concatenate([r[0] for r in results])
    c = n_pairs(m)
    counts = np.bincount(status[status >= 0], minlength=c)
    est = {p: EstimatorResult.from_count(int(k), n, seed) for p, k in zip(pairs(m), counts)}
    recs = []
    if records:
        st0, last0, f0, bits0 = results[0][0], results[0][1], results[0][2], results[0][3]
        for t in range(min(records, st0.size)):
            s = int(st0[t])
            kind = "collapsed" if s >= 0 else ("failure" if s == FAILED else "survived")
            post = _post_state(rho, f0[t]) if f0[t] @ np.diag(rho).real > 0 else None
            recs.append(TrajectoryRecord(
                bits=bits0[t, :int(min(last0[t], len(schedule.taus)))].copy(),
                status=kind,
                pair=pairs(m)[s] if s >= 0 else None,
                round=int(last0[t]),
                state=TruncatedState.from_operator(post) if post is not None else None,
            ))
    return DistillationEstimate(
        pairs=est,
        coincidence=EstimatorResult.from_count(int(counts.sum()), n, seed),
        failure=EstimatorResult.from_count(int(np.sum(status == FAILED)), n, seed),
        survived=EstimatorResult.from_count(int(np.sum(status == SURVIVED)), n, seed),
        records=tuple(recs),
    )


def estimate_yields(m, schedule, n, seed=0, threads=1):
    """``(gamma_hat, beta_hat)`` for pair AB from a photon at A and from the vacuum."""
    ph = simulate_distillation(m, 0.0, None, schedule, n, seed, "photon", 0, threads)
    vac = simulate_distillation(m, 0.0, None, schedule, n, seed, "vacuum", 0, threads,
                                _stream=STREAM_VACUUM)
    return ph[(0, 1)], vac[(0, 1)]


# ---------------------------------------------------------------- full-space operators


def full_index(m, j):
    """Index of ``|e_j>`` in the ``2**m`` mode basis (telescope 0 most significant)."""
    return 1 << (m - 1 - j)


def embed(m, rho):
    """Truncated ``(M+1)``-dimensional operator placed in the ``2**M`` space."""
    idx = [0] + [full_index(m, j) for j in range(m)]
    out = np.zeros((2 ** m, 2 ** m), dtype=complex)
    out[np.ix_(idx, idx)] = rho
    return out


def site_operator(m, ops):
    """``(x)_k ops.get(k, I)`` for the two-level modes ``k = 0..m-1``."""
    out = np.ones((1, 1), dtype=complex)
    for k in range(m):
        out = np.kron(out, ops.get(k, np.eye(2)))
    return out


def pair_operator(m, pair, op4, rest=None):
    """Two-mode operator ``op4`` on ``pair`` (first telescope most significant) times ``rest``."""
    x, y = pair
    perm = [x, y] + [k for k in range(m) if k not in pair]
    tail = site_operator(m - 2, {i: rest for i in range(m - 2)} if rest is not None else {})
    full = np.kron(op4, tail).reshape((2,) * (2 * m))
    inv = np.argsort(perm)
    full = full.transpose(list(inv) + [m + i for i in inv])
    return full.reshape(2 ** m, 2 ** m)


def _ket(n_x, n_y):
    v = np.zeros(4, dtype=complex)
    v[2 * n_x + n_y] = 1.0
    return v


def _outer(v):
    return np.outer(v, v.conj())


def _gjc_interference(delta):
    """``|delta+->`` projectors; ``|10>`` carries the photon at the first telescope."""
    plus = (_ket(0, 1) + np.exp(1j * delta) * _ket(1, 0)) / np.sqrt(2)
    minus = (_ket(0, 1) - np.exp(1j * delta) * _ket(1, 0)) / np.sqrt(2)
    return _outer(plus), _outer(minus)


def _local_projector(delta, alpha):
    v = np.array([1.0, (-1) ** alpha * np.exp(1j * delta)]) / np.sqrt(2)
    return _outer(v)


def _probabilities(ops, rho_full):
    return np.array([np.trace(o @ rho_full).real for o in ops])


def _categorical(prob_rows, u):
    """Row-wise inverse-CDF draws; ``prob_rows`` may be unnormalized."""
    cdf = np.cumsum(prob_rows, axis=1)
    target = u * cdf[:, -1]
    idx = np.sum(cdf <= target[:, None], axis=1)
    return np.minimum(idx, prob_rows.shape[1] - 1)


# ---------------------------------------------------------------- scheme simulation


def _simulate_coin(labels, per_pair, n, seed, threads, mode_split):
    """Shared path for the classical-randomness schemes.

    ``per_pair[k]`` holds one or two outcome-probability vectors (one per
    measurement mode) over global label indices for pair ``k``.
    """
    c = len(per_pair)
    n_lab = len(labels)

    def job(chunk):
        k, _, size = chunk
        u = _chunk_uniforms(seed, STREAM_SCHEME, k, size, 3)
        pair = np.minimum((u[:, 0] * c).astype(int), c - 1)
        mode = (u[:, 1] < 0.5).astype(int) if mode_split else np.zeros(size, int)
        out = np.zeros(n_lab, dtype=np.int64)
        for p in range(c):
            for md, probs in enumerate(per_pair[p]):
                sel = (pair == p) & (mode == md)
                if not sel.any():
                    continue
                draws = _categorical(np.broadcast_to(probs, (sel.sum(), n_lab)), u[sel, 2])
                out += np.bincount(draws, minlength=n_lab)
        return out

    return sum(_map_chunks(job, n, threads))


def _schedule_for(schedule):
    if schedule is None:
        raise ValueError("quantum-randomness schemes need a tau schedule")
    if not isinstance(schedule, TauSchedule):
        schedule = TauSchedule(tuple(schedule))
    if schedule.variant is not Variant.PURE_WEAK:
        raise ValueError("scheme simulation supports pure-weak schedules only")
    return schedule


def _simulate_distilled(m, rho, schedule, labels, stage2, n, seed, threads):
    """Distill, then measure the collapsed pair with ``stage2[pair] -> (ops3, label_idx, split)``.

    ``ops3`` are operators restricted to ``span{vac, e_X, e_Y}``; ``split``
    marks schemes whose final measurement succeeds only half the time.
    """
    results = _run_distillation(m, rho, schedule, n, seed, STREAM_SCHEME, threads, 0)
    n_lab = len(labels)
    i_fail = labels.index(FAILURE)
    counts = np.zeros(n_lab, dtype=np.int64)
    for status, _, factors, _, bad, extra in results:
        if bad:
            raise RuntimeError("sampled an outcome with vanishing probability; truncation is broken")
        counts[i_fail] += int(np.sum(status < 0))
        for k, (x, y) in enumerate(pairs(m)):
            sel = status == k
            if not sel.any():
                continue
            ops3, lab_idx, split = stage2[(x, y)]
            span = [0, x + 1, y + 1]
            f = factors[sel]
            leak = np.delete(f * np.diag(rho).real, span, axis=1).sum(axis=1)
            if np.any(leak > 1e-12 * (f * np.diag(rho).real).sum(axis=1)):
                raise RuntimeError("collapsed state has weight outside the selected pair")
            s = np.sqrt(f[:, span])
            states = s[:, :, None] * rho[np.ix_(span, span)][None] * s[:, None, :]
            states /= np.trace(states, axis1=1, axis2=2).real[:, None, None]
            probs = np.einsum("kij,nji->nk", ops3, states).real
            probs = np.clip(probs, 0.0, None)
            if split:
                probs = 0.5 * probs
            rest = np.clip(1.0 - probs.sum(axis=1), 0.0, None)
            rows = np.concatenate([probs, rest[:, None]], axis=1)
            draws = _categorical(rows, extra[sel, 0])
            full = np.bincount(draws, minlength=len(lab_idx) + 1)
            for j, li in enumerate(lab_idx):
                counts[li] += full[j]
            counts[i_fail] += full[-1]
    return counts


def _restricted(m, pair, op_full):
    idx = [0, full_index(m, pair[0]), full_index(m, pair[1])]
    return op_full[np.ix_(idx, idx)]


def simulate_scheme(settings: MeasurementSettings, m, epsilon, g, schedule=None, n=10 ** 6,
                    seed=0, threads=1) -> EmpiricalDistribution:
    """Sample ``n`` shots of a measurement scheme and return outcome counts."""
    scheme = settings.scheme
    g = g if isinstance(g, CoherenceSet) else CoherenceSet.uniform(m, g)
    rho = build_stellar_state(m, epsilon, g).to_operator() if epsilon > 0 else \
        TruncatedState.vacuum_state(m).to_operator()
    rho_full = embed(m, rho)
    tele = settings.telescope_phases(m)
    vac1 = np.diag([1.0, 0.0])

    if scheme is Scheme.GJC_CLASSICAL:
        labels = []
        for p in pairs(m):
            labels += [Outcome("vac", p), Outcome("01", p), Outcome("10", p),
                       Outcome("pm", p, "+"), Outcome("pm", p, "-")]
        labels.append(FAILURE)
        per_pair = []
        for k, p in enumerate(pairs(m)):
            plus, minus = _gjc_interference(settings.pair_phase(m, p))
            p_pm = _probabilities([pair_operator(m, p, plus), pair_operator(m, p, minus)], rho_full)
            p_path = _probabilities([pair_operator(m, p, _outer(_ket(0, 1))),
                                     pair_operator(m, p, _outer(_ket(1, 0)))], rho_full)
            base = 5 * k
            inter = np.zeros(len(labels))
            inter[base + 3:base + 5] = p_pm
            inter[base] = 1.0 - p_pm.sum()
            path = np.zeros(len(labels))
            path[base + 1:base + 3] = p_path
            path[base] = 1.0 - p_path.sum()
            per_pair.append((inter, path))
        counts = _simulate_coin(labels, per_pair, n, seed, threads, True)

    elif scheme is Scheme.LOCAL_CLASSICAL:
        labels = [Outcome("alpha", p, (a, b)) for p in pairs(m) for a in (0, 1) for b in (0, 1)]
        labels.append(FAILURE)
        per_pair = []
        for k, (x, y) in enumerate(pairs(m)):
            probs = np.zeros(len(labels))
            for j, (a, b) in enumerate(itertools.product((0, 1), repeat=2)):
                op = site_operator(m, {x: _local_projector(tele[x], a), y: _local_projector(tele[y], b)})
                probs[4 * k + j] = np.trace(op @ rho_full).real
            per_pair.append((probs,))
        counts = _simulate_coin(labels, per_pair, n, seed, threads, False)

    elif scheme is Scheme.ALL_PAIRS_BIPARTITE:
        if m % 2:
            raise ValueError("all-pairs bipartite distribution needs even m")
        labels = [Outcome("pm", p, s) for p in pairs(m) for s in "+-"] + [FAILURE]
        counts = _simulate_matching(m, settings, rho_full, labels, n, seed, threads)

    elif scheme in (Scheme.GJC_QUANTUM, Scheme.LOCAL_QUANTUM):
        schedule = _schedule_for(schedule)
        stage2, labels = {}, []
        for p in pairs(m):
            if scheme is Scheme.GJC_QUANTUM:
                projs = _gjc_interference(settings.pair_phase(m, p))
                ops = [_restricted(m, p, pair_operator(m, p, o, vac1)) for o in projs]
                labs = [Outcome("pm", p, "+"), Outcome("pm", p, "-")]
                split = True
            else:
                x, y = p
                ops, labs = [], []
                for a, b in itertools.product((0, 1), repeat=2):
                    op = site_operator(m, {k: vac1 for k in range(m) if k not in p}
                                       | {x: _local_projector(tele[x], a), y: _local_projector(tele[y], b)})
                    ops.append(_restricted(m, p, op))
                    labs.append(Outcome("alpha", p, (a, b)))
                split = False
            idx = list(range(len(labels), len(labels) + len(labs)))
            labels += labs
            stage2[p] = (np.array(ops), idx, split)
        labels.append(FAILURE)
        counts = _simulate_distilled(m, rho, schedule, labels, stage2, n, seed, threads)

    elif scheme is Scheme.MULTIPARTITE_FRAME:
        labels = []
        probs = []
        for bits in itertools.product((0, 1), repeat=m):
            op = site_operator(m, {k: _local_projector(tele[k], bits[k]) for k in range(m)})
            labels.append(Outcome("alpha", None, "".join(map(str, bits))))
            probs.append(np.trace(op @ rho_full).real)
        probs = np.clip(np.array(probs), 0.0, None)

        def job(chunk):
            k, _, size = chunk
            u = _chunk_uniforms(seed, STREAM_SCHEME, k, size, 1)[:, 0]
            return np.bincount(_categorical(np.broadcast_to(probs, (size, probs.size)), u),
                               minlength=probs.size)

        counts = sum(_map_chunks(job, n, threads))

    else:
        raise ValueError(f"{scheme.value} cannot be sampled in the one-photon model")

    return EmpiricalDistribution(tuple(labels), np.asarray(counts, dtype=np.int64), int(n), int(seed))


def _matchings(items):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for k, other in enumerate(rest):
        for tail in _matchings(rest[:k] + rest[k + 1:]):
            yield ((first, other),) + tail


def _simulate_matching(m, settings, rho_full, labels, n, seed, threads):
    """Uniform perfect matching, then a half-successful interference test on every matched pair."""
    match = list(_matchings(list(range(m))))
    n_lab = len(labels)
    pair_probs = {}
    for p in pairs(m):
        projs = _gjc_interference(settings.pair_phase(m, p))
        vac_rest = np.diag([1.0, 0.0])
        pair_probs[p] = _probabilities([pair_operator(m, p, o, vac_rest) for o in projs], rho_full)
    lab_index = {str(l): i for i, l in enumerate(labels)}
    n_half = m // 2

    def job(chunk):
        k, _, size = chunk
        u = _chunk_uniforms(seed, STREAM_SCHEME, k, size, 2 + n_half)
        which = np.minimum((u[:, 0] * len(match)).astype(int), len(match) - 1)
        rows = np.zeros((size, n_lab))
        for mi, mt in enumerate(match):
            sel = which == mi
            if not sel.any():
                continue
            for slot, p in enumerate(mt):
                inter = u[sel, 2 + slot] < 0.5
                for s, pr in zip("+-", pair_probs[p]):
                    rows[np.flatnonzero(sel), lab_index[f"{Outcome('pm', p, s)}"]] = inter * pr
        rows[:, -1] = np.clip(1.0 - rows[:, :-1].sum(axis=1), 0.0, None)
        return np.bincount(_categorical(rows, u[:, 1]), minlength=n_lab)

    return sum(_map_chunks(job, n, threads))


def analytic_pair_collapse(m, schedule, source):
    """Brute-force collapse probability of pair AB by enumerating heralding histories.

    Used as a small-``m`` oracle in tests: each telescope is removed at the first
    round it reports ``M1``; enumerates all removal-round assignments.
    """
    taus = list(schedule.taus)
    d = len(taus)
    hard = schedule.variant is Variant.HARD_FINAL
    surv = np.cumprod([1.0] + [1.0 - t for t in taus])
    # rounds index 1..d for removal, d+1 means never removed
    total = 0.0
    for removal in itertools.product(range(1, d + 2), repeat=m):
        w = 1.0
        for k, r in enumerate(removal):
            photon_here = source == "photon" and k == 0
            if photon_here:
                if r != d + 1:
                    w = 0.0
                    break
                continue
            w *= surv[r - 1] * taus[r - 1] if r <= d else surv[d]
        if w == 0.0:
            continue
        # replay: stop at the first round where <= 2 remain
        alive = set(range(m))
        outcome = None
        for r in range(1, d + 1):
            alive -= {k for k in range(m) if removal[k] == r}
            if len(alive) == 2:
                outcome = tuple(sorted(alive))
                break
            if len(alive) < 2:
                outcome = "fail"
                break
        if outcome is None and hard and len(alive) >= 2:
            if (0 in alive) and (1 in alive):
                total += w / comb(len(alive), 2)
            continue
        if outcome == (0, 1):
            total += w
    return total
