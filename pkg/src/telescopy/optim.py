"""Compiled coordinate ascent with golden-section line searches.

Objectives are selected by an integer code so the whole ascent runs inside
numba; the public wrappers live in :mod:`telescopy.distillation`.
"""

import math

from numba import njit

GAMMA_PURE = 0
GAMMA_HARD = 1
LOCAL_RATIO = 2

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True)
def _binom(n, k):
    if k < 0 or k > n:
        return 0.0
    out = 1.0
    for i in range(1, k + 1):
        out = out * (n - k + i) / i
    return out


@njit(cache=True)
def _weak_sums(m, taus):
    """Return ``(gamma, beta, x_last)`` summed over the weak rounds."""
    gamma = 0.0
    beta = 0.0
    x_prev = 1.0
    p = m - 2
    for r in range(taus.shape[0]):
        x = x_prev * (1.0 - taus[r])
        term = x * ((1.0 - x) ** p - (1.0 - x_prev) ** p)
        gamma += term
        beta += term * x
        x_prev = x
    return gamma, beta, x_prev


@njit(cache=True)
def _fallback(m, x):
    g = 0.0
    b = 0.0
    for j in range(1, m - 1):
        w = _binom(m - 2, j) * x ** (j + 1) * (1.0 - x) ** (m - 2 - j) / _binom(j + 2, 2)
        g += w
        b += w * x
    return g, b


@njit(cache=True)
def objective(kind, m, taus, eps, factor):
    gamma, beta, x_last = _weak_sums(m, taus)
    if kind == GAMMA_PURE:
        return gamma
    if kind == GAMMA_HARD:
        g, _ = _fallback(m, x_last)
        return gamma + g
    # local ratio gamma^2 / beta under beta (1 - eps) >= factor * eps * gamma / m
    if gamma <= 0.0 or beta <= 0.0:
        return -2.0
    need = factor * eps * gamma / m
    have = beta * (1.0 - eps)
    if have < need:
        return -1.0 - (need - have) / need
    return gamma * gamma / beta


@njit(cache=True)
def _line_search(kind, m, taus, r, lo, hi, xtol, eps, factor):
    a = lo
    b = hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    taus[r] = c
    fc = objective(kind, m, taus, eps, factor)
    taus[r] = d
    fd = objective(kind, m, taus, eps, factor)
    evals = 2
    while b - a > xtol:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = b - INV_PHI * (b - a)
            taus[r] = c
            fc = objective(kind, m, taus, eps, factor)
        else:
            a = c
            c = d
            fc = fd
            d = a + INV_PHI * (b - a)
            taus[r] = d
            fd = objective(kind, m, taus, eps, factor)
        evals += 1
    if fc >= fd:
        return c, fc, evals
    return d, fd, evals


@njit(cache=True)
def coordinate_ascent(kind, m, taus, lo, hi, xtol, ftol, budget, eps, factor):
    """Maximize ``objective`` in place over ``taus``; one sweep visits rounds last to first.

    Returns ``(best, sweeps, evaluations, converged)``. Convergence means a
    full sweep improved the objective by less than ``ftol``.
    """
    best = objective(kind, m, taus, eps, factor)
    evals = 1
    sweeps = 0
    n = taus.shape[0]
    if n == 0:
        return best, 0, evals, True
    while evals < budget:
        start = best
        for r in range(n - 1, -1, -1):
            old = taus[r]
            t, f, k = _line_search(kind, m, taus, r, lo, hi, xtol, eps, factor)
            evals += k
            if f > best:
                taus[r] = t
                best = f
            else:
                taus[r] = old
            if evals >= budget:
                break
        sweeps += 1
        if evals >= budget:
            return best, sweeps, evals, False
        if best - start < ftol:
            return best, sweeps, evals, True
    return best, sweeps, evals, False
