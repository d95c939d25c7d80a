"""Resonant magnetic Schrodinger model near a potential well.

In normal-form coordinates the symbol reads

    p = p2 + sum_j A_{j,3}(x) xi_j + p4(x) + O(|(x, xi)|^6),
    A_{j,3}(x) = sum_k a_{j,k} x1^k x2^(3-k),   p4(x) = sum_k c_k x1^k x2^(4-k).

After the scaling ``x = eps^(1/2) y`` the quartic part becomes the perturbation
``q`` of ``p2 + eps q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .symbols import FrequencyVector, PolySymbol, basis_convert, flow_average


def _frac(v) -> Fraction:
    return Fraction(str(v)) if isinstance(v, float) else Fraction(v)


@dataclass(frozen=True)
class MagneticModel:
    """Cubic vector potential, quartic electric term and harmonic frequencies.

    ``a_coeffs[j-1][k]`` is ``a_{j,k}``.  ``V2`` (the Hessian ``V''(0)``) may be
    given instead of ``lam``; for the kinetic term ``|xi|^2`` its eigenvalues
    ``v`` give ``lambda = sqrt(2 v)``.  The coefficients of ``A`` and ``p4``
    are understood in the normalized coordinates.
    """

    a_coeffs: tuple = ((0, 0, 0, 0), (0, 0, 0, 0))
    p4_coeffs: tuple = (0, 0, 0, 0, 0)
    lam: FrequencyVector | None = None
    V2: tuple | None = None

    def __post_init__(self):
        a = tuple(tuple(_frac(v) for v in row) for row in self.a_coeffs)
        if len(a) != 2 or any(len(r) != 4 for r in a):
            raise ValueError("a_coeffs must be two rows of four coefficients")
        p4 = tuple(_frac(v) for v in self.p4_coeffs)
        if len(p4) != 5:
            raise ValueError("p4_coeffs needs five coefficients")
        object.__setattr__(self, "a_coeffs", a)
        object.__setattr__(self, "p4_coeffs", p4)
        lam = self.lam
        if self.V2 is not None:
            v2 = np.asarray(self.V2, dtype=float)
            if v2.shape != (2, 2) or not np.allclose(v2, v2.T):
                raise ValueError("V2 must be a symmetric 2x2 matrix")
            ev = np.linalg.eigvalsh(v2)
            if ev.min() <= 0:
                raise ValueError("V''(0) must be positive definite")
            from_v2 = tuple(Fraction(float(np.sqrt(2 * e))).limit_denominator(10 ** 6)
                            for e in ev[::-1])
            if lam is None:
                lam = from_v2
        if lam is None:
            lam = (1, 1)
        object.__setattr__(self, "lam", FrequencyVector.coerce(lam))

    @classmethod
    def from_field(cls, b2, b1, b0, lam=(1, 1)) -> "MagneticModel":
        """A potential whose field has coefficients ``(b2, b1, b0)``."""
        b2, b1, b0 = _frac(b2), _frac(b1), _frac(b0)
        a1 = (0, 0, -b2, 0)          # a_{1,2} = -b2
        a2 = (0, b0, b1 / 2, 0)      # a_{2,1} = b0, a_{2,2} = b1/2
        return cls(a_coeffs=(a1, a2), lam=lam)

    def potential_terms(self, j: int) -> dict:
        """``A_{j,3}`` as ``{(i1, i2): coeff}`` for ``x1^i1 x2^i2``."""
        return {(k, 3 - k): c for k, c in enumerate(self.a_coeffs[j - 1]) if c}

    def with_gauge(self, phi: Mapping[tuple, object]) -> "MagneticModel":
        """Model with ``A`` replaced by ``A + grad(phi)`` for a quartic ``phi(x)``."""
        a = [list(r) for r in self.a_coeffs]
        for (i1, i2), c in phi.items():
            if i1 + i2 != 4:
                raise ValueError("phi must be a homogeneous quartic")
            c = _frac(c)
            if i1:
                a[0][i1 - 1] += i1 * c
            if i2:
                # d/dx2 of x1^i1 x2^i2 = i2 x1^i1 x2^(i2-1), i.e. k = i1
                a[1][i1] += i2 * c
        return MagneticModel(a_coeffs=tuple(map(tuple, a)), p4_coeffs=self.p4_coeffs,
                             lam=self.lam)


def magnetic_symbol(model: MagneticModel, exact: bool = True) -> tuple[PolySymbol, PolySymbol]:
    """Return ``(p2, q)`` for the rescaled model ``p2 + eps q``."""
    real: dict = {}
    for j in (1, 2):
        for (i1, i2), c in model.potential_terms(j).items():
            key = (i1, i2, 1 if j == 1 else 0, 1 if j == 2 else 0)
            real[key] = real.get(key, 0) + c
    for k, c in enumerate(model.p4_coeffs):
        if c:
            key = (k, 4 - k, 0, 0)
            real[key] = real.get(key, 0) + c
    q = basis_convert(real, exact=exact)
    return PolySymbol.harmonic(model.lam, exact=exact), q


def magnetic_field(model: MagneticModel) -> tuple[Fraction, Fraction, Fraction]:
    """Coefficients ``(b2, b1, b0)`` of ``B = d1 A2 - d2 A1 = b2 x1^2 + b1 x1 x2 + b0 x2^2``."""
    (a10, a11, a12, a13), (a20, a21, a22, a23) = model.a_coeffs
    return 3 * a23 - a12, 2 * (a22 - a11), a21 - 3 * a10


def field_polynomial(model: MagneticModel) -> dict:
    """``B(x)`` by direct differentiation, as ``{(i1, i2): coeff}``."""
    out: dict = {}
    for (i1, i2), c in model.potential_terms(2).items():
        if i1:
            out[(i1 - 1, i2)] = out.get((i1 - 1, i2), 0) + i1 * c
    for (i1, i2), c in model.potential_terms(1).items():
        if i2:
            out[(i1, i2 - 1)] = out.get((i1, i2 - 1), 0) - i2 * c
    return {k: v for k, v in out.items() if v}


@dataclass(frozen=True)
class GaugeReport:
    difference: PolySymbol
    field_before: tuple
    field_after: tuple
    raw_difference: PolySymbol = field(repr=False)

    @property
    def invariant(self) -> bool:
        return self.difference.is_zero()


def gauge_check(model: MagneticModel, phi: Mapping[tuple, object]) -> GaugeReport:
    """Compare flow averages of ``q`` for ``A`` and ``A + d phi``.

    The unaveraged difference is ``grad(phi) . xi``, which equals
    ``H_p2 phi / lambda`` when ``lambda1 == lambda2``; its average vanishes.
    """
    if model.lam.lam[0] != model.lam.lam[1]:
        raise ValueError("gauge invariance of the average needs lambda1 == lambda2")
    other = model.with_gauge(phi)
    _, q0 = magnetic_symbol(model)
    _, q1 = magnetic_symbol(other)
    diff = flow_average(q1, model.lam) - flow_average(q0, model.lam)
    return GaugeReport(difference=diff, field_before=magnetic_field(model),
                       field_after=magnetic_field(other), raw_difference=q1 - q0)


def default_model() -> MagneticModel:
    """Field ``b = (1, 2, 1)``: single-component levels of ``<q>`` above 0."""
    return MagneticModel.from_field(1, 2, 1)
