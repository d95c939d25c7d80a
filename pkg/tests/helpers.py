"""Random inputs shared by several test modules."""
from fractions import Fraction

import numpy as np

from resonant_spectra.symbols import PolySymbol, basis_convert


def random_real_poly(rng, degrees=(3, 4), n_terms=6, den=7):
    """Random real polynomial in (x, xi) with small rational coefficients."""
    terms = {}
    for _ in range(n_terms):
        d = int(rng.choice(degrees))
        cuts = np.sort(rng.integers(0, d + 1, size=3))
        key = (int(cuts[0]), int(cuts[1] - cuts[0]), int(cuts[2] - cuts[1]), int(d - cuts[2]))
        terms[key] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, den + 1)))
    return {k: v for k, v in terms.items() if v}


def random_symbol(rng, degrees=(3, 4), n_terms=6) -> PolySymbol:
    return basis_convert(random_real_poly(rng, degrees, n_terms))


def random_model_coeffs(rng):
    a = tuple(tuple(Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5))) for _ in range(4))
              for _ in range(2))
    p4 = tuple(Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5))) for _ in range(5))
    return a, p4


def random_gauge(rng):
    """Random quartic phi(x) as {(i1, i2): coeff}."""
    return {(k, 4 - k): Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 5)))
            for k in range(5)}
