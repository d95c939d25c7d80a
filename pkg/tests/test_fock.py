import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp

from resonant_spectra.fock import (FockBasis, FockOperator, TruncationError, _weyl_1d,
                                   cluster_projector, harmonic_eigenvalues, quantum_time_average,
                                   weyl_quantize)
from resonant_spectra.symbols import PolySymbol, flow_average, real_monomial

from helpers import random_symbol


def _ladder(size):
    a = np.diag(np.sqrt(np.arange(1, size)), 1)
    return a, a.T.copy()


@pytest.mark.parametrize("m,n", [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (0, 4)])
def test_weyl_ordering_matches_word_average(m, n):
    # Weyl-ordered a^m (a+)^n is the average over all distinct orderings
    size = 30
    a, ad = _ladder(size)
    words = set(itertools.permutations("a" * m + "d" * n))
    acc = np.zeros((size, size))
    for w in words:
        mat = np.eye(size)
        for ch in w:
            mat = mat @ (a if ch == "a" else ad)
        acc += mat
    acc /= len(words)
    diag = _weyl_1d(m, n, size)
    for s in range(size - (m + n)):
        t = s - m + n
        if t >= 0:
            assert diag[s] == pytest.approx(acc[t, s], rel=1e-12, abs=1e-12)


def test_basis_layout():
    b = FockBasis(5, 0.1)
    assert b.dim == 21
    for i, (n1, n2) in enumerate(b.states):
        assert b.index(n1, n2) == i
    sl = b.cluster_slice(3)
    assert np.all(b.cluster[sl] == 3)
    assert FockBasis.for_energy(0.02).n_max == 71
    with pytest.raises(ValueError):
        FockBasis(3, 0.0)


def test_harmonic_quantization_is_diagonal():
    b = FockBasis(20, 0.05)
    P = weyl_quantize(PolySymbol.harmonic((1, 1)), b)
    assert np.allclose(P.dense(), np.diag(harmonic_eigenvalues(b)), atol=1e-14)
    assert P.is_real


def test_position_to_the_fourth():
    # Weyl(x1^4) = X1^4 exactly, with X1 = sqrt(h/2) (a1 + a1+)
    h = 0.1
    n = 24
    b = FockBasis(n, h)
    Q = weyl_quantize(real_monomial(4, 0, 0, 0), b).dense()
    big = n + 6
    a, ad = _ladder(big)
    X = math.sqrt(h / 2) * (a + ad)
    X4 = np.linalg.matrix_power(X, 4)
    for i, (n1, n2) in enumerate(b.states):
        for j, (m1, m2) in enumerate(b.states):
            if n1 + n2 <= n - 4 and m1 + m2 <= n - 4:
                expected = X4[n1, m1] if n2 == m2 else 0.0
                assert Q[i, j] == pytest.approx(expected, abs=1e-13)


def test_quantized_symbol_is_hermitian(default_symbols):
    _, q, _ = default_symbols
    Q = weyl_quantize(q, FockBasis(20, 0.1))
    assert Q.hermiticity_error() < 1e-14
    assert not Q.is_real
    with pytest.raises(ValueError):
        weyl_quantize(PolySymbol({(1, 0, 0, 0): 1}), FockBasis(5, 0.1))
    with pytest.raises(TruncationError):
        weyl_quantize(q, FockBasis(3, 0.1))


def test_trace_of_cluster_block(default_symbols):
    # tr P_k Op(z1 zb1) P_k = 2h sum_{n1=0..k} (n1 + 1/2)
    h = 0.05
    b = FockBasis(12, h)
    op = weyl_quantize(PolySymbol({(1, 0, 1, 0): 1}), b)
    for k in range(10):
        expected = 2 * h * sum(n1 + 0.5 for n1 in range(k + 1))
        assert np.trace(op.block(k)).real == pytest.approx(expected, rel=1e-13)


def test_cluster_projectors():
    b = FockBasis(6, 0.1)
    Ps = [cluster_projector(b, k) for k in range(7)]
    total = sum(Ps)
    assert np.allclose(total.toarray(), np.eye(b.dim))
    for k, P in enumerate(Ps):
        assert np.allclose((P @ P).toarray(), P.toarray())
        assert P.diagonal().sum() == k + 1


def test_time_average_equals_average_symbol(rng):
    b = FockBasis(16, 0.07)
    for _ in range(3):
        q = random_symbol(rng)
        q = q + q.conjugate()
        Q = weyl_quantize(q, b)
        A = quantum_time_average(Q)
        W = weyl_quantize(flow_average(q, (1, 1)), b)
        assert abs(A.matrix - W.matrix).max() <= 1e-12 * Q.norm()


def test_time_average_commutes_with_p2(default_symbols):
    b = FockBasis(14, 0.1)
    Q = weyl_quantize(default_symbols[1], b)
    A = quantum_time_average(Q).dense()
    P = np.diag(harmonic_eigenvalues(b))
    assert np.abs(A @ P - P @ A).max() < 1e-14


def test_invariant_blocks(default_symbols):
    b = FockBasis(12, 0.1)
    Q = weyl_quantize(default_symbols[1], b)
    blocks = Q.invariant_blocks()
    assert len(blocks) == 2
    assert sorted(np.concatenate(blocks).tolist()) == list(range(b.dim))


def test_save_load(tmp_path, default_symbols):
    b = FockBasis(10, 0.1)
    Q = weyl_quantize(default_symbols[1], b)
    Q.save(tmp_path / "q.npz")
    R = FockOperator.load(tmp_path / "q.npz")
    assert R.basis == b and R.symbol_hash == Q.symbol_hash
    assert abs(R.matrix - Q.matrix).max() == 0
