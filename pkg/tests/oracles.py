"""Independent reference computations used by the tests."""

import itertools
from functools import reduce

import numpy as np

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])


def _site_op(op, i, n):
    return reduce(np.kron, [op if k == i else np.eye(2) for k in range(n)])


def ed_thermal(inst, g: float, beta: float):
    """Exact diagonalization of H_P - g sum sigma^x at inverse temperature beta.

    Returns (per-edge <sz_i sz_j>, probabilities of the 2^n z-basis states,
    spin 0 most significant, +1 first).
    """
    n = inst.n
    Z = [_site_op(SZ, i, n) for i in range(n)]
    H = sum(J * Z[i] @ Z[j] for i, j, J in inst.edges) + sum(h * Z[i] for i, h in enumerate(inst.h))
    H = H - g * sum(_site_op(SX, i, n) for i in range(n))
    w, v = np.linalg.eigh(H)
    rho = (v * np.exp(-beta * (w - w.min()))) @ v.T
    rho /= np.trace(rho)
    corr = np.array([np.trace(rho @ Z[i] @ Z[j]) for i, j, _ in inst.edges])
    return corr, np.diag(rho).copy()


def gibbs_probs(inst, beta: float):
    """Exact classical Gibbs probabilities over all states (spin 0 most significant, + first)."""
    S = np.array(list(itertools.product([1, -1], repeat=inst.n)))
    E = np.array([sum(J * s[i] * s[j] for i, j, J in inst.edges) + s @ inst.h for s in S])
    p = np.exp(-beta * (E - E.min()))
    return S, p / p.sum()


def chain_transfer_matrix_corr(J, h, beta):
    """<s_k s_{k+1}> of an open classical chain via transfer matrices."""
    n = len(h)
    vals = np.array([1.0, -1.0])

    def bond(k, insert):
        M = np.exp(-beta * J[k] * np.outer(vals, vals))
        return M * np.outer(vals, vals) if insert else M

    field = [np.diag(np.exp(-beta * h[k] * vals)) for k in range(n)]

    def contract(insert_at):
        v = np.ones(2) @ field[0]
        for k in range(n - 1):
            v = v @ bond(k, k == insert_at) @ field[k + 1]
        return v.sum()

    Zp = contract(-1)
    return np.array([contract(k) / Zp for k in range(n - 1)])


def config_index(S):
    """Row index into the itertools.product([1, -1]) ordering."""
    S = np.asarray(S)
    bits = (S < 0).astype(np.int64)
    return bits @ (1 << np.arange(S.shape[1] - 1, -1, -1))
