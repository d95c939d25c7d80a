"""Polynomial phase-space symbols in complex coordinates.

A symbol on R^4 = {(x1, x2, xi1, xi2)} is stored as a finite map

    (alpha1, alpha2, beta1, beta2) -> c

standing for ``c * z1**alpha1 * z2**alpha2 * zb1**beta1 * zb2**beta2`` with
``z_j = x_j + i xi_j`` and ``zb_j`` its conjugate.  Real-valued symbols satisfy
``c(alpha, beta) == conj(c(beta, alpha))``.

Poisson bracket convention (used everywhere in the package)::

    {a, b} = H_a b = a_xi . b_x - a_x . b_xi = 2i sum_j (a_{z_j} b_{zb_j} - a_{zb_j} b_{z_j})

so that ``{p2, z_j} = -i lambda_j z_j`` for ``p2 = sum lambda_j/2 |z_j|^2``.

Coefficients are Gaussian rationals (``sympy`` ``QQ_I``) in exact mode and
Python ``complex`` in float mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from sympy.polys.domains import QQ, QQ_I

MAX_DEGREE = 8

Key = tuple  # (alpha1, alpha2, beta1, beta2)


class DegreeOverflowError(ValueError):
    """Raised when a symbol exceeds the configured maximal total degree."""


class ResonanceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# coefficient helpers

def _to_qq(value) -> "QQ.dtype":
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, str):
        f = Fraction(value)
        return QQ(f.numerator, f.denominator)
    if isinstance(value, float):
        f = Fraction(value)
        return QQ(f.numerator, f.denominator)
    return QQ.convert(value)


def exact_coeff(value):
    """Coerce ``value`` to a Gaussian rational."""
    if isinstance(value, QQ_I.dtype):
        return value
    if isinstance(value, tuple):
        re, im = value
        return QQ_I(_to_qq(re), _to_qq(im))
    if isinstance(value, complex):
        return QQ_I(_to_qq(value.real), _to_qq(value.imag))
    return QQ_I(_to_qq(value), QQ(0))


def float_coeff(value) -> complex:
    if isinstance(value, QQ_I.dtype):
        return complex(float(value.x), float(value.y))
    if isinstance(value, tuple):
        return complex(float(Fraction(value[0])), float(Fraction(value[1])))
    return complex(value)


def _conj(c):
    if isinstance(c, QQ_I.dtype):
        return QQ_I(c.x, -c.y)
    return c.conjugate()


def _qq_str(v) -> str:
    num, den = int(v.numerator), int(v.denominator)
    return f"{num}/{den}"


# ---------------------------------------------------------------------------


def _degree(key: Key) -> int:
    return sum(key)


def _swap(key: Key) -> Key:
    return (key[2], key[3], key[0], key[1])


class PolySymbol:
    """Polynomial in ``z1, z2, zb1, zb2`` with exact or float coefficients.

    Instances are immutable; every operation returns a new symbol.
    """

    __slots__ = ("_terms", "exact", "max_degree", "_compiled")

    def __init__(self, terms: Mapping[Key, object] | None = None, exact: bool = True,
                 max_degree: int = MAX_DEGREE):
        conv = exact_coeff if exact else float_coeff
        clean = {}
        for key, c in (terms or {}).items():
            key = tuple(int(k) for k in key)
            if len(key) != 4 or min(key) < 0:
                raise ValueError(f"bad monomial key {key!r}")
            c = conv(c)
            if not c:
                continue
            if _degree(key) > max_degree:
                raise DegreeOverflowError(
                    f"monomial {key} has degree {_degree(key)} > {max_degree}")
            clean[key] = c
        self._terms = clean
        self.exact = exact
        self.max_degree = max_degree
        self._compiled = None

    # -- construction -----------------------------------------------------
    @classmethod
    def _raw(cls, terms: dict, exact: bool, max_degree: int = MAX_DEGREE) -> "PolySymbol":
        terms = {k: v for k, v in terms.items() if v}
        for key in terms:
            if _degree(key) > max_degree:
                raise DegreeOverflowError(
                    f"monomial {key} has degree {_degree(key)} > {max_degree}")
        obj = cls.__new__(cls)
        obj._terms = terms
        obj.exact = exact
        obj.max_degree = max_degree
        obj._compiled = None
        return obj

    @classmethod
    def zero(cls, exact: bool = True) -> "PolySymbol":
        return cls({}, exact=exact)

    @classmethod
    def constant(cls, c, exact: bool = True) -> "PolySymbol":
        return cls({(0, 0, 0, 0): c}, exact=exact)

    @classmethod
    def z(cls, j: int, exact: bool = True) -> "PolySymbol":
        key = [0, 0, 0, 0]
        key[j - 1] = 1
        return cls({tuple(key): 1}, exact=exact)

    @classmethod
    def zbar(cls, j: int, exact: bool = True) -> "PolySymbol":
        key = [0, 0, 0, 0]
        key[j + 1] = 1
        return cls({tuple(key): 1}, exact=exact)

    @classmethod
    def harmonic(cls, lam: "FrequencyVector | Sequence", exact: bool = True) -> "PolySymbol":
        """``p2 = sum_j lambda_j/2 (x_j^2 + xi_j^2) = sum_j lambda_j/2 z_j zb_j``."""
        lam = FrequencyVector.coerce(lam)
        l1, l2 = lam.lam
        return cls({(1, 0, 1, 0): l1 / 2, (0, 1, 0, 1): l2 / 2}, exact=exact)

    # -- mapping protocol -------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __getitem__(self, key):
        zero = QQ_I(0, 0) if self.exact else 0j
        return self._terms.get(tuple(key), zero)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((_degree(k) for k in self._terms), default=0)

    def is_real(self, tol: float = 0.0) -> bool:
        for key, c in self._terms.items():
            d = c - _conj(self[_swap(key)])
            if self.exact:
                if d:
                    return False
            elif abs(d) > tol:
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, PolySymbol):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash(frozenset((k, float_coeff(v)) for k, v in self._terms.items()))

    def __repr__(self):
        if not self._terms:
            return "PolySymbol(0)"
        parts = []
        for key in sorted(self._terms):
            parts.append(f"({self._terms[key]})*{_monomial_str(key)}")
        return "PolySymbol(" + " + ".join(parts) + ")"

    # -- algebra ----------------------------------------------------------
    def _coerce(self, other) -> "PolySymbol":
        if isinstance(other, PolySymbol):
            if other.exact != self.exact:
                raise TypeError("cannot mix exact and float symbols")
            return other
        return PolySymbol.constant(other, exact=self.exact)

    def _scalar(self, c):
        return exact_coeff(c) if self.exact else float_coeff(c)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out[k] + v if k in out else v
        return PolySymbol._raw(out, self.exact, max(self.max_degree, other.max_degree))

    __radd__ = __add__

    def __neg__(self):
        return PolySymbol._raw({k: -v for k, v in self._terms.items()}, self.exact, self.max_degree)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, PolySymbol):
            other = self._coerce(other)
            out: dict = {}
            for k1, v1 in self._terms.items():
                for k2, v2 in other._terms.items():
                    k = (k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2], k1[3] + k2[3])
                    p = v1 * v2
                    out[k] = out[k] + p if k in out else p
            return PolySymbol._raw(out, self.exact, max(self.max_degree, other.max_degree))
        c = self._scalar(other)
        return PolySymbol._raw({k: v * c for k, v in self._terms.items()}, self.exact,
                               self.max_degree)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = self._scalar(other)
        return PolySymbol._raw({k: v / c for k, v in self._terms.items()}, self.exact,
                               self.max_degree)

    def __pow__(self, n: int):
        out = PolySymbol.constant(1, exact=self.exact)
        for _ in range(n):
            out = out * self
        return out

    def conjugate(self) -> "PolySymbol":
        """Complex conjugate of the function (not of the formal coefficients)."""
        return PolySymbol._raw({_swap(k): _conj(v) for k, v in self._terms.items()},
                               self.exact, self.max_degree)

    def real_part(self) -> "PolySymbol":
        return (self + self.conjugate()) / 2

    def with_max_degree(self, max_degree: int) -> "PolySymbol":
        return PolySymbol._raw(dict(self._terms), self.exact, max_degree)

    def to_float(self) -> "PolySymbol":
        if not self.exact:
            return self
        return PolySymbol._raw({k: float_coeff(v) for k, v in self._terms.items()}, False,
                               self.max_degree)

    def homogeneous_part(self, degree: int) -> "PolySymbol":
        return PolySymbol._raw({k: v for k, v in self._terms.items() if _degree(k) == degree},
                               self.exact, self.max_degree)

    def derivative(self, var: int) -> "PolySymbol":
        """Formal derivative in variable ``var`` (0..3 = z1, z2, zb1, zb2)."""
        out = {}
        for k, v in self._terms.items():
            if k[var] == 0:
                continue
            nk = list(k)
            nk[var] -= 1
            out[tuple(nk)] = v * k[var]
        return PolySymbol._raw(out, self.exact, self.max_degree)

    # -- numerics ---------------------------------------------------------
    def _compile(self):
        if self._compiled is None:
            keys = list(self._terms)
            exps = np.array(keys, dtype=int).reshape(-1, 4)
            coefs = np.array([float_coeff(self._terms[k]) for k in keys], dtype=complex)
            self._compiled = (exps, coefs)
        return self._compiled

    def evaluate_z(self, z) -> np.ndarray:
        """Evaluate at complex points ``z`` of shape (..., 2)."""
        z = np.asarray(z, dtype=complex)
        exps, coefs = self._compile()
        if len(coefs) == 0:
            return np.zeros(z.shape[:-1], dtype=complex)
        vars4 = np.concatenate([z, np.conj(z)], axis=-1)[..., None, :]
        mons = np.prod(vars4 ** exps, axis=-1)
        return mons @ coefs

    def __call__(self, points) -> np.ndarray:
        """Evaluate at real phase points ``(x1, x2, xi1, xi2)`` of shape (..., 4).

        Returns the real part; the imaginary part vanishes for real symbols.
        """
        points = np.asarray(points, dtype=float)
        z = points[..., :2] + 1j * points[..., 2:]
        return self.evaluate_z(z).real

    def vector_field(self, points) -> np.ndarray:
        """Hamilton field ``(x', xi') = (p_xi, -p_x)`` at real phase points."""
        points = np.asarray(points, dtype=float)
        z = points[..., :2] + 1j * points[..., 2:]
        zdot = np.stack([-2j * self.derivative(2).evaluate_z(z),
                         -2j * self.derivative(3).evaluate_z(z)], axis=-1)
        return np.concatenate([zdot.real, zdot.imag], axis=-1)

    # -- real coordinates -------------------------------------------------
    def to_real(self) -> dict:
        """Coefficients in the monomial basis ``x1^a1 x2^a2 xi1^b1 xi2^b2``.

        Keys are ``(a1, a2, b1, b2)``; values are rationals (exact) or floats.
        """
        out: dict = {}
        for key, c in self._terms.items():
            for rk, rc in _z_monomial_in_real(key, self.exact).items():
                p = c * rc
                out[rk] = out[rk] + p if rk in out else p
        result = {}
        for k, v in out.items():
            if not v:
                continue
            if self.exact:
                if v.y != 0:
                    raise ValueError("symbol is not real-valued")
                result[k] = Fraction(int(v.x.numerator), int(v.x.denominator))
            else:
                result[k] = v.real
        return result

    # -- serialization ----------------------------------------------------
    def to_records(self) -> list[dict]:
        recs = []
        for key in sorted(self._terms):
            c = self._terms[key]
            if self.exact:
                re, im = _qq_str(c.x), _qq_str(c.y)
            else:
                re, im = c.real, c.imag
            recs.append({"alpha": [key[0], key[1]], "beta": [key[2], key[3]], "re": re, "im": im})
        return recs

    @classmethod
    def from_records(cls, records: Iterable[Mapping], exact: bool = True) -> "PolySymbol":
        terms = {}
        for r in records:
            key = (r["alpha"][0], r["alpha"][1], r["beta"][0], r["beta"][1])
            if exact:
                terms[key] = QQ_I(_to_qq(str(r["re"])), _to_qq(str(r["im"])))
            else:
                terms[key] = complex(float(Fraction(str(r["re"]))), float(Fraction(str(r["im"]))))
        return cls(terms, exact=exact)


def _monomial_str(key: Key) -> str:
    names = ("z1", "z2", "zb1", "zb2")
    parts = [f"{n}^{e}" if e > 1 else n for n, e in zip(names, key) if e]
    return "*".join(parts) or "1"


# ---------------------------------------------------------------------------
# basis conversion

@lru_cache(maxsize=None)
def _linear_powers(exact: bool):
    half = exact_coeff(Fraction(1, 2)) if exact else 0.5
    # x_j = (z_j + zb_j)/2,  xi_j = (z_j - zb_j)/(2i) = -i/2 z_j + i/2 zb_j
    mi2 = QQ_I(0, QQ(-1, 2)) if exact else -0.5j
    pi2 = QQ_I(0, QQ(1, 2)) if exact else 0.5j
    xs, xis = [], []
    for j in range(2):
        zk = [0, 0, 0, 0]
        zk[j] = 1
        zbk = [0, 0, 0, 0]
        zbk[j + 2] = 1
        xs.append(PolySymbol._raw({tuple(zk): half, tuple(zbk): half}, exact))
        xis.append(PolySymbol._raw({tuple(zk): mi2, tuple(zbk): pi2}, exact))
    return xs, xis


@lru_cache(maxsize=None)
def _real_monomial_in_z(key: Key, exact: bool) -> PolySymbol:
    xs, xis = _linear_powers(exact)
    out = PolySymbol.constant(1, exact=exact)
    for j in range(2):
        out = out * xs[j] ** key[j] * xis[j] ** key[j + 2]
    return out


@lru_cache(maxsize=None)
def _z_monomial_in_real(key: Key, exact: bool) -> dict:
    # z_j = x_j + i xi_j, zb_j = x_j - i xi_j; reuse PolySymbol arithmetic on real keys
    one = QQ_I(1, 0) if exact else 1.0
    i_ = QQ_I(0, 1) if exact else 1j
    mi = QQ_I(0, -1) if exact else -1j
    out = PolySymbol._raw({(0, 0, 0, 0): one}, exact, max_degree=10 ** 6)
    for j in range(2):
        xk = [0, 0, 0, 0]
        xk[j] = 1
        xik = [0, 0, 0, 0]
        xik[j + 2] = 1
        zj = PolySymbol._raw({tuple(xk): one, tuple(xik): i_}, exact, 10 ** 6)
        zbj = PolySymbol._raw({tuple(xk): one, tuple(xik): mi}, exact, 10 ** 6)
        out = out * zj ** key[j] * zbj ** key[j + 2]
    return out.terms


def basis_convert(real_terms: Mapping[Key, object], exact: bool = True,
                  max_degree: int = MAX_DEGREE) -> PolySymbol:
    """Express a polynomial in ``(x1, x2, xi1, xi2)`` monomials in ``z, zb``.

    ``real_terms`` maps ``(a1, a2, b1, b2)`` (powers of x1, x2, xi1, xi2) to
    real coefficients.
    """
    out: dict = {}
    for key, c in real_terms.items():
        key = tuple(int(k) for k in key)
        if sum(key) > max_degree:
            raise DegreeOverflowError(f"monomial {key} exceeds degree {max_degree}")
        c = exact_coeff(c) if exact else float_coeff(c)
        for zk, zc in _real_monomial_in_z(key, exact).items():
            p = c * zc
            out[zk] = out[zk] + p if zk in out else p
    return PolySymbol._raw(out, exact, max_degree)


def real_monomial(a1: int = 0, a2: int = 0, b1: int = 0, b2: int = 0, coeff=1,
                  exact: bool = True) -> PolySymbol:
    """``coeff * x1^a1 x2^a2 xi1^b1 xi2^b2`` as a symbol."""
    return basis_convert({(a1, a2, b1, b2): coeff}, exact=exact)


# ---------------------------------------------------------------------------
# frequencies


@dataclass(frozen=True)
class FrequencyVector:
    """Positive rational frequencies with an integer resonance certificate."""

    lam: tuple
    resonance_k: tuple | None = None

    def __post_init__(self):
        lam = tuple(Fraction(str(v)) if isinstance(v, float) else Fraction(v) for v in self.lam)
        if len(lam) != 2 or min(lam) <= 0:
            raise ValueError(f"frequencies must be two positive numbers, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        k = self.resonance_k
        if k is None:
            ratio = lam[0] / lam[1]
            k = (ratio.denominator, -ratio.numerator)
        k = (int(k[0]), int(k[1]))
        if k == (0, 0) or lam[0] * k[0] + lam[1] * k[1] != 0:
            raise ResonanceError(f"{k} is not a resonance of {lam}")
        object.__setattr__(self, "resonance_k", k)

    @classmethod
    def coerce(cls, value) -> "FrequencyVector":
        if isinstance(value, FrequencyVector):
            return value
        return cls(tuple(value))

    @property
    def period(self) -> float:
        """Minimal period ``2 pi / gcd(lambda1, lambda2)`` of the harmonic flow."""
        a, b = self.lam
        g = Fraction(math.gcd(a.numerator * b.denominator, b.numerator * a.denominator),
                     a.denominator * b.denominator)
        return 2 * math.pi / float(g)

    def detuning(self, key: Key) -> Fraction:
        """``lambda . (alpha - beta)`` for a monomial key."""
        return self.lam[0] * (key[0] - key[2]) + self.lam[1] * (key[1] - key[3])

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.lam])


# ---------------------------------------------------------------------------
# operations


def poisson_bracket(a: PolySymbol, b: PolySymbol) -> PolySymbol:
    """``{a, b} = H_a b = a_xi . b_x - a_x . b_xi``."""
    if a.exact != b.exact:
        raise TypeError("cannot mix exact and float symbols")
    two_i = QQ_I(0, 2) if a.exact else 2j
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            for j in range(2):
                # a_{z_j} b_{zb_j} - a_{zb_j} b_{z_j}
                c = ka[j] * kb[j + 2] - ka[j + 2] * kb[j]
                if c == 0:
                    continue
                # both derivative products give the same monomial
                k = [ka[i] + kb[i] for i in range(4)]
                k[j] -= 1
                k[j + 2] -= 1
                if min(k) < 0:
                    continue
                k = tuple(k)
                p = va * vb * c * two_i
                out[k] = out[k] + p if k in out else p
    return PolySymbol._raw(out, a.exact, max(a.max_degree, b.max_degree))


def flow_average(q: PolySymbol, lam: FrequencyVector | Sequence) -> PolySymbol:
    """Time average of ``q`` along the periodic flow of ``p2``.

    The harmonic flow multiplies ``z^alpha zb^beta`` by
    ``exp(-i t lambda.(alpha-beta))``, so averaging keeps the resonant terms.
    """
    lam = FrequencyVector.coerce(lam)
    return PolySymbol._raw({k: v for k, v in q.items() if lam.detuning(k) == 0}, q.exact,
                           q.max_degree)


def solve_homological(q: PolySymbol, lam: FrequencyVector | Sequence,
                      assume_averaged: bool = False) -> PolySymbol:
    """Solve ``{p2, G} = q - <q>`` with ``G`` free of resonant monomials.

    If ``assume_averaged`` is set, ``q`` must not contain resonant terms.
    """
    lam = FrequencyVector.coerce(lam)
    out = {}
    for k, v in q.items():
        d = lam.detuning(k)
        if d == 0:
            if assume_averaged:
                raise ResonanceError(f"resonant monomial {_monomial_str(k)} in averaged input")
            continue
        # {p2, m} = -i d m
        if q.exact:
            out[k] = v * QQ_I(0, QQ(d.denominator, d.numerator))
        else:
            out[k] = v * (1j / float(d))
    return PolySymbol._raw(out, q.exact, q.max_degree)


def harmonic_frequencies(p2: PolySymbol) -> FrequencyVector:
    """Read ``lambda`` off a diagonal quadratic ``sum lambda_j/2 z_j zb_j``."""
    allowed = {(1, 0, 1, 0), (0, 1, 0, 1)}
    if set(p2) - allowed or len(p2) != 2:
        raise ValueError("p2 must have the form sum_j lambda_j/2 z_j zb_j")
    lam = []
    for key in ((1, 0, 1, 0), (0, 1, 0, 1)):
        c = p2[key]
        if p2.exact:
            if c.y != 0:
                raise ValueError("p2 coefficients must be real")
            lam.append(2 * Fraction(int(c.x.numerator), int(c.x.denominator)))
        else:
            lam.append(Fraction(2 * c.real).limit_denominator(10 ** 6))
    return FrequencyVector(tuple(lam))


@dataclass(frozen=True)
class NormalForm:
    """Result of the classical averaging iteration.

    ``averaged[j]`` is the flow-invariant coefficient of ``eps^(j+1)``,
    ``generators[j]`` the coefficient of ``eps^j`` in ``G``, and ``remainder``
    the ``eps^(order+1)`` coefficient of the transformed symbol.
    """

    p2: PolySymbol
    averaged: tuple
    generators: tuple
    remainder: PolySymbol

    @property
    def order(self) -> int:
        return len(self.averaged)

    def truncated(self, eps) -> PolySymbol:
        out = self.p2
        for j, qj in enumerate(self.averaged, start=1):
            out = out + qj * (eps ** j if self.p2.exact else float(eps) ** j)
        return out


def _lie_transform(series: Sequence[PolySymbol], gens: Sequence[PolySymbol], order: int):
    """Coefficients ``0..order`` of ``exp(eps ad_G) X`` with ``G = sum eps^i G_i``."""
    exact = series[0].exact
    zero = PolySymbol.zero(exact)
    X = [series[m] if m < len(series) else zero for m in range(order + 1)]
    total = list(X)
    term = list(X)
    for n in range(1, order + 1):
        new = [zero] * (order + 1)
        for m in range(1, order + 1):
            acc = zero
            for i, g in enumerate(gens):
                src = m - 1 - i
                if src < 0:
                    break
                if g.is_zero() or term[src].is_zero():
                    continue
                acc = acc + poisson_bracket(g, term[src])
            new[m] = acc / n
        term = new
        total = [t + s for t, s in zip(total, term)]
    return total


def birkhoff_normal_form(p2: PolySymbol, q: PolySymbol | Sequence[PolySymbol],
                         order: int, max_degree: int = MAX_DEGREE) -> NormalForm:
    """Classical averaging of ``p2 + eps q1 + eps^2 q2 + ...`` to ``order``.

    Finds ``G = G0 + eps G1 + ...`` with
    ``p_eps o exp(eps H_G) = p2 + eps qbar1 + ... + eps^N qbarN + O(eps^(N+1))``
    and every ``qbar_j`` Poisson-commuting with ``p2``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    lam = harmonic_frequencies(p2)
    qs = [q] if isinstance(q, PolySymbol) else list(q)
    series = [p2.with_max_degree(max_degree)] + [s.with_max_degree(max_degree) for s in qs]
    gens: list[PolySymbol] = []
    averaged: list[PolySymbol] = []
    for j in range(1, order + 1):
        coeffs = _lie_transform(series, gens, j)
        r = coeffs[j]
        avg = flow_average(r, lam)
        averaged.append(avg)
        gens.append(solve_homological(r - avg, lam))
    remainder = _lie_transform(series, gens, order + 1)[order + 1]
    return NormalForm(p2=p2, averaged=tuple(averaged), generators=tuple(gens),
                      remainder=remainder)
