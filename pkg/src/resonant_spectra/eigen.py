"""Hermitian eigenvalue problems.

The production path is LAPACK's ``?heev`` (Householder tridiagonalization
followed by implicit-shift QL/QR).  A cyclic Jacobi sweep on the real
embedding serves as an independent cross-check for small matrices.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .fock import FockOperator


class ConvergenceError(RuntimeError):
    pass


def hermitian_eigen(A: np.ndarray, vectors: bool = False):
    """Ascending eigenvalues (and optionally eigenvectors) of a Hermitian matrix."""
    A = np.asarray(A)
    if A.shape[0] == 0:
        return (np.zeros(0), np.zeros((0, 0))) if vectors else np.zeros(0)
    try:
        if vectors:
            w, v = sla.eigh(A, driver="ev")
            return w, v
        return sla.eigh(A, eigvals_only=True, driver="ev")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(str(exc)) from exc


def symmetric_eigen(op: FockOperator | np.ndarray, vectors: bool = False):
    """Ascending spectrum of a quantized operator.

    Decoupled subspaces (e.g. even and odd clusters for even symbols) are
    diagonalized separately; eigenvectors are returned in the full basis.
    """
    if not isinstance(op, FockOperator):
        return hermitian_eigen(op, vectors)
    blocks = op.invariant_blocks()
    ws, vs, idx = [], [], []
    for b in blocks:
        sub = op.matrix[b][:, b].toarray()
        if vectors:
            w, v = hermitian_eigen(sub, True)
            vs.append((b, v))
        else:
            w = hermitian_eigen(sub)
        ws.append(w)
        idx.append(np.full(len(w), len(ws) - 1))
    w = np.concatenate(ws)
    order = np.argsort(w, kind="stable")
    if not vectors:
        return w[order]
    V = np.zeros((op.basis.dim, len(w)), dtype=complex)
    col = 0
    for b, v in vs:
        V[np.ix_(b, np.arange(col, col + v.shape[1]))] = v
        col += v.shape[1]
    return w[order], V[:, order]


def jacobi_eigenvalues(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Cyclic Jacobi rotations; complex Hermitian input goes through its real embedding."""
    A = np.asarray(A)
    if np.iscomplexobj(A):
        B = np.block([[A.real, -A.imag], [A.imag, A.real]])
        w = jacobi_eigenvalues(B, tol, max_sweeps)
        return w[::2]
    S = np.array(A, dtype=float)
    n = S.shape[0]
    scale = np.linalg.norm(S) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(S, -1) ** 2))
        if off <= tol * scale:
            return np.sort(np.diag(S))
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(S[p, q]) < 1e-300:
                    continue
                theta = (S[q, q] - S[p, p]) / (2 * S[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                Sp, Sq = S[:, p].copy(), S[:, q].copy()
                S[:, p] = c * Sp - s * Sq
                S[:, q] = s * Sp + c * Sq
                Sp, Sq = S[p, :].copy(), S[q, :].copy()
                S[p, :] = c * Sp - s * Sq
                S[q, :] = s * Sp + c * Sq
    raise ConvergenceError("Jacobi iteration did not converge")
