import numpy as np
import pytest

from resonant_spectra.eigen import hermitian_eigen, jacobi_eigenvalues, symmetric_eigen
from resonant_spectra.fock import FockBasis, weyl_quantize


def test_jacobi_agrees_with_lapack(rng):
    A = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    A = A + A.conj().T
    assert np.allclose(jacobi_eigenvalues(A), hermitian_eigen(A), atol=1e-12)
    B = rng.normal(size=(9, 9))
    B = B + B.T
    assert np.allclose(jacobi_eigenvalues(B), np.linalg.eigvalsh(B), atol=1e-12)


def test_block_solver_matches_dense(default_symbols):
    p2, q, _ = default_symbols
    b = FockBasis(14, 0.1)
    H = weyl_quantize(p2, b) + weyl_quantize(q, b).scale(0.03)
    w = symmetric_eigen(H)
    assert np.allclose(w, np.linalg.eigvalsh(H.dense()), atol=1e-13)
    w2, V = symmetric_eigen(H, vectors=True)
    assert np.allclose(w2, w)
    M = H.dense()
    assert np.abs(M @ V - V * w2).max() < 1e-12
    assert np.allclose(V.conj().T @ V, np.eye(b.dim), atol=1e-12)


def test_empty_matrix():
    assert hermitian_eigen(np.zeros((0, 0))).shape == (0,)
