import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from resonant_spectra.symbols import (DegreeOverflowError, FrequencyVector, PolySymbol,
                                      ResonanceError, basis_convert, birkhoff_normal_form,
                                      flow_average, harmonic_frequencies, poisson_bracket,
                                      real_monomial, solve_homological)

from helpers import random_real_poly, random_symbol

P2 = PolySymbol.harmonic((1, 1))


def _eval_real(terms, pts):
    out = np.zeros(len(pts))
    for (a1, a2, b1, b2), c in terms.items():
        out += float(c) * pts[:, 0] ** a1 * pts[:, 1] ** a2 * pts[:, 2] ** b1 * pts[:, 3] ** b2
    return out


def test_basis_conversion_matches_pointwise(rng):
    for _ in range(5):
        terms = random_real_poly(rng, degrees=(1, 2, 3, 4))
        s = basis_convert(terms)
        pts = rng.normal(size=(20, 4))
        assert np.allclose(s(pts), _eval_real(terms, pts), rtol=1e-12, atol=1e-12)
        assert s.to_real() == terms


def test_harmonic_symbol_is_half_norm_squared(rng):
    pts = rng.normal(size=(20, 4))
    assert np.allclose(P2(pts), 0.5 * np.sum(pts ** 2, axis=1), atol=1e-13)
    assert harmonic_frequencies(P2).lam == (1, 1)


def test_zero_coefficients_are_dropped():
    s = PolySymbol({(1, 0, 0, 0): 0, (0, 1, 0, 0): 1})
    assert len(s) == 1
    assert (s - s).is_zero()


def test_degree_overflow():
    with pytest.raises(DegreeOverflowError):
        PolySymbol({(5, 4, 0, 0): 1})
    x = real_monomial(1, 0, 0, 0)
    with pytest.raises(DegreeOverflowError):
        x ** 9


def test_canonical_brackets():
    x1, x2 = real_monomial(1, 0, 0, 0), real_monomial(0, 1, 0, 0)
    xi1, xi2 = real_monomial(0, 0, 1, 0), real_monomial(0, 0, 0, 1)
    one = PolySymbol.constant(1)
    assert poisson_bracket(xi1, x1) == one
    assert poisson_bracket(xi2, x2) == one
    assert poisson_bracket(xi1, x2).is_zero()
    assert poisson_bracket(x1, x2).is_zero()


def test_bracket_matches_finite_differences(rng):
    a, b = random_symbol(rng).to_float(), random_symbol(rng).to_float()
    ab = poisson_bracket(a, b)
    pts = rng.normal(size=(10, 4)) * 0.7

    def grad(f, p, d=1e-5):
        g = np.zeros(4)
        for i in range(4):
            e = np.zeros(4)
            e[i] = d
            g[i] = (f(p + e) - f(p - e)) / (2 * d)
        return g

    for p in pts:
        ga, gb = grad(a, p), grad(b, p)
        expected = ga[2:] @ gb[:2] - ga[:2] @ gb[2:]
        assert ab(p) == pytest.approx(expected, rel=1e-6, abs=1e-8)


def test_jacobi_identity_and_antisymmetry(rng):
    for _ in range(3):
        a, b, c = (random_symbol(rng, degrees=(2, 3), n_terms=4) for _ in range(3))
        assert (poisson_bracket(a, b) + poisson_bracket(b, a)).is_zero()
        jac = (poisson_bracket(a, poisson_bracket(b, c)) + poisson_bracket(b, poisson_bracket(c, a))
               + poisson_bracket(c, poisson_bracket(a, b)))
        assert jac.is_zero()


def test_flow_average_matches_quadrature(rng):
    # the flow of p2 is periodic; a uniform rule over one period is exact for
    # trigonometric polynomials of low order
    q = random_symbol(rng).to_float()
    qa = flow_average(q, (1, 1))
    n = 64
    ts = 2 * math.pi * np.arange(n) / n
    for p in rng.normal(size=(5, 4)):
        z = p[:2] + 1j * p[2:]
        zt = z[None, :] * np.exp(-1j * ts)[:, None]
        pts = np.concatenate([zt.real, zt.imag], axis=1)
        assert qa(p) == pytest.approx(q(pts).mean(), abs=1e-12)


def test_flow_average_detuned_frequencies():
    fv = FrequencyVector((2, 1))
    assert fv.resonance_k == (1, -2)
    assert fv.period == pytest.approx(2 * math.pi)
    # z1 zb2^2 is resonant for lambda = (2, 1)
    q = PolySymbol({(1, 0, 0, 2): 1, (0, 0, 1, 2): 1, (1, 0, 1, 0): 1})
    assert set(flow_average(q, fv)) == {(1, 0, 0, 2), (1, 0, 1, 0)}


def test_flow_average_is_idempotent_and_invariant(rng):
    q = random_symbol(rng)
    qa = flow_average(q, (1, 1))
    assert flow_average(qa, (1, 1)) == qa
    assert poisson_bracket(P2, qa).is_zero()


def test_homological_equation_exact(rng):
    for _ in range(5):
        q = random_symbol(rng)
        G = solve_homological(q, (1, 1))
        assert (poisson_bracket(P2, G) - (q - flow_average(q, (1, 1)))).is_zero()
        assert flow_average(G, (1, 1)).is_zero()


def test_homological_rejects_resonant_input():
    with pytest.raises(ResonanceError):
        solve_homological(PolySymbol({(1, 0, 1, 0): 1}), (1, 1), assume_averaged=True)


def test_homological_solution_of_x1():
    # H_p G = x1 with the harmonic flow gives G = -xi1
    G = solve_homological(real_monomial(1, 0, 0, 0), (1, 1))
    assert G == real_monomial(0, 0, 1, 0, coeff=-1)


def test_homological_solution_matches_kernel_quadrature(rng):
    # zero-mean solution G(rho) = (1/T) int_0^T (t - T/2) (q - <q>)(phi_t rho) dt
    q = random_symbol(rng).to_float()
    qt = q - flow_average(q, (1, 1))
    G = solve_homological(q, (1, 1))
    T = 2 * math.pi
    nodes, weights = np.polynomial.legendre.leggauss(80)
    ts = (nodes + 1) * T / 2
    ws = weights * T / 2
    for p in rng.normal(size=(5, 4)):
        z = p[:2] + 1j * p[2:]
        zt = z[None, :] * np.exp(-1j * ts)[:, None]
        vals = qt(np.concatenate([zt.real, zt.imag], axis=1))
        oracle = np.sum(ws * (ts - T / 2) * vals) / T
        assert G.to_float()(p) == pytest.approx(oracle, abs=1e-11)


def test_birkhoff_order_two_structure(default_symbols):
    p2, q, qa = default_symbols
    nf = birkhoff_normal_form(p2, q, 2)
    assert nf.averaged[0] == qa
    for qb in nf.averaged:
        assert poisson_bracket(p2, qb).is_zero()
        assert qb.is_real()
    assert nf.averaged[1].degree == 6
    assert nf.remainder.degree == 8


def test_birkhoff_transform_numerically(default_symbols, rng):
    # p_eps o exp(eps H_G) - (p2 + eps qbar1 + eps^2 qbar2) = O(eps^3)
    p2, q, _ = default_symbols
    nf = birkhoff_normal_form(p2, q, 2)
    pe_parts = (p2.to_float(), q.to_float())
    G0, G1 = (g.to_float() for g in nf.generators)
    start = rng.normal(size=4) * 0.6
    errs = []
    for eps in (0.02, 0.01):
        G = (G0 + G1 * eps) * eps
        sol = solve_ivp(lambda t, y: G.vector_field(y), (0, 1), start, method="DOP853",
                        rtol=1e-13, atol=1e-15)
        end = sol.y[:, -1]
        lhs = pe_parts[0](end) + eps * pe_parts[1](end)
        rhs = (p2.to_float()(start) + eps * nf.averaged[0].to_float()(start)
               + eps ** 2 * nf.averaged[1].to_float()(start))
        errs.append(abs(lhs - rhs))
    assert 6 < errs[0] / errs[1] < 10


def test_records_round_trip(rng):
    s = random_symbol(rng) * PolySymbol({(0, 0, 0, 0): complex(0, 1)}) + random_symbol(rng)
    assert PolySymbol.from_records(s.to_records()) == s
    f = s.to_float()
    back = PolySymbol.from_records(f.to_records(), exact=False)
    assert np.allclose(back(np.ones((1, 4))), f(np.ones((1, 4))))


def test_vector_field_is_hamiltonian(rng):
    q = random_symbol(rng).to_float()
    p = rng.normal(size=4)
    v = q.vector_field(p)
    d = 1e-6
    g = np.array([(q(p + d * e) - q(p - d * e)) / (2 * d) for e in np.eye(4)])
    assert np.allclose(v, np.concatenate([g[2:], -g[:2]]), atol=1e-6)


coef = st.fractions(min_value=-5, max_value=5, max_denominator=6)
keys = st.tuples(*(st.integers(0, 1) for _ in range(4)))  # products stay within degree 8


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(keys, coef, max_size=5), st.dictionaries(keys, coef, max_size=5))
def test_average_is_linear_projection(a, b):
    A, B = basis_convert(a), basis_convert(b)
    lam = (1, 1)
    assert flow_average(A + B, lam) == flow_average(A, lam) + flow_average(B, lam)
    assert flow_average(flow_average(A, lam), lam) == flow_average(A, lam)
    assert (A * B).to_real() == {k: v for k, v in _real_product(a, b).items() if v}


def _real_product(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, Fraction(0)) + Fraction(va) * Fraction(vb)
    return out
