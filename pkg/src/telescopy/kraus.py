"""Single-telescope weak photon-number measurement.

Both matrices are written in the local photon-number basis with the vacuum
first, ``(|0>, |1>)``.
"""

import numpy as np


def _check_tau(tau, closed=True):
    tau = float(tau)
    if not np.isfinite(tau):
        raise ValueError(f"tau must be finite, got {tau}")
    if closed and not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if not closed and not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return tau


def weak_kraus(tau):
    """Return the Kraus pair ``(M0, M1)`` of a weak measurement of strength ``tau``.

    ``M0`` is the survival branch and leaves a photon untouched while damping
    the vacuum amplitude; ``M1`` heralds the vacuum.
    """
    tau = _check_tau(tau)
    m0 = np.array([[np.sqrt(1.0 - tau), 0.0], [0.0, 1.0]])
    m1 = np.array([[np.sqrt(tau), 0.0], [0.0, 0.0]])
    return m0, m1


def completeness_residual(tau):
    m0, m1 = weak_kraus(tau)
    return float(np.max(np.abs(m0.conj().T @ m0 + m1.conj().T @ m1 - np.eye(2))))


def ancilla_unitary(tau):
    tau = _check_tau(tau)
    c, s = np.sqrt(1.0 - tau), np.sqrt(tau)
    return np.array([[c, -s], [s, c]])


def controlled_ancilla_gate(tau):
    """Controlled rotation ``|0><0| (x) U_a + |1><1| (x) I`` (system qubit first)."""
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    return np.kron(p0, ancilla_unitary(tau)) + np.kron(p1, np.eye(2))


def ancilla_circuit_check(tau):
    """Largest operator-norm gap between the ancilla circuit and ``(M0, M1)``.

    The ancilla starts in ``|0>``; projecting it onto ``|0>`` or ``|1>`` after the
    controlled rotation leaves an operator on the system which should equal
    ``M0`` or ``M1`` respectively.
    """
    tau = _check_tau(tau, closed=False)
    gate = controlled_ancilla_gate(tau)
    # rows/cols indexed (system, ancilla); fix ancilla input to |0>
    g = gate.reshape(2, 2, 2, 2)[:, :, :, 0]
    branches = [g[:, a, :] for a in (0, 1)]
    targets = weak_kraus(tau)
    return max(float(np.linalg.norm(b - t, ord=2)) for b, t in zip(branches, targets))


def ancilla_branch(tau, outcome):
    """System operator implemented when the ancilla is found in ``|outcome>``."""
    gate = controlled_ancilla_gate(_check_tau(tau))
    return gate.reshape(2, 2, 2, 2)[:, outcome, :, 0]
