"""Hamiltonian flows of polynomial symbols, periods and the energy profile g/f."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .symbols import PolySymbol, harmonic_frequencies


class IntegrationError(RuntimeError):
    """Step-size underflow or other failure of the flow integrator."""


class NoReturnError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray        # (n, 4): x1, x2, xi1, xi2
    energy_drift: float

    @property
    def samples(self):
        return list(zip(self.times, self.states))


def _harmonic_lambda(p: PolySymbol):
    try:
        return harmonic_frequencies(p).as_floats()
    except ValueError:
        return None


def _rotate(lam: np.ndarray, start: np.ndarray, t: np.ndarray) -> np.ndarray:
    z0 = start[:2] + 1j * start[2:]
    z = z0[None, :] * np.exp(-1j * np.outer(t, lam))
    return np.concatenate([z.real, z.imag], axis=1)


def integrate_flow(p: PolySymbol, start, t_end: float, tol: float = 1e-10,
                   n_samples: int = 201) -> Trajectory:
    """Follow ``exp(t H_p)`` from ``start`` up to ``t_end``.

    Quadratic diagonal ``p`` is rotated exactly; anything else goes through an
    adaptive DOP853 integration with ``rtol = tol``.
    """
    start = np.asarray(start, dtype=float)
    if t_end == 0:
        return Trajectory(np.zeros(1), start[None, :].copy(), 0.0)
    ts = np.linspace(0.0, t_end, n_samples)
    pf = p.to_float()
    lam = _harmonic_lambda(p)
    if lam is not None:
        states = _rotate(lam, start, ts)
    else:
        sol = solve_ivp(lambda t, y: pf.vector_field(y), (0.0, t_end), start, method="DOP853",
                        rtol=tol, atol=tol * 1e-2, t_eval=ts)
        if not sol.success:
            raise IntegrationError(sol.message)
        states = sol.y.T
    energy = pf(states)
    return Trajectory(ts, states, float(np.max(np.abs(energy - energy[0]))))


def energy_point(p: PolySymbol, E: float, direction=(0.8, 0.5, 0.3, -0.6)) -> np.ndarray:
    """A point of ``p = E`` on the ray spanned by ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    pf = p.to_float()
    hi = 1.0
    while pf(hi * u) < E:
        hi *= 2
        if hi > 1e6:
            raise ValueError(f"energy {E} not reached along {direction}")
    s = brentq(lambda s: float(pf(s * u)) - E, 0.0, hi, xtol=1e-15)
    return s * u


def detect_period(p: PolySymbol, E: float, tol: float = 1e-10, t_max: float = 100.0,
                  start=None) -> float:
    """Minimal return time of a generic orbit on ``p = E``.

    The squared return distance is scanned for near-zero minima; each minimum
    is refined by bisection on its time derivative.
    """
    x0 = energy_point(p, E) if start is None else np.asarray(start, dtype=float)
    pf = p.to_float()
    lam = _harmonic_lambda(p)
    if lam is not None:
        def state(t):
            return _rotate(lam, x0, np.atleast_1d(t))
    else:
        sol = solve_ivp(lambda t, y: pf.vector_field(y), (0.0, t_max), x0, method="DOP853",
                        rtol=1e-12, atol=1e-14, dense_output=True)
        if not sol.success:
            raise IntegrationError(sol.message)

        def state(t):
            return sol.sol(np.atleast_1d(t)).T

    def d2(t):
        return np.sum((state(t) - x0) ** 2, axis=-1)

    def dd2(t):
        s = state(t)[0]
        return float(2 * (s - x0) @ pf.vector_field(s))

    scale = float(x0 @ x0)
    ts = np.linspace(0.0, t_max, int(200 * t_max) + 1)
    dist = d2(ts)
    for i in range(1, len(ts) - 1):
        if dist[i] <= dist[i - 1] and dist[i] <= dist[i + 1] and dist[i] < 1e-2 * scale:
            a, b = ts[i - 1], ts[i + 1]
            if dd2(a) < 0 < dd2(b):
                t = brentq(dd2, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            else:
                t = ts[i]
            if math.sqrt(d2(t)[0] / scale) < max(tol, 1e-9) * 10:
                return float(t)
    raise NoReturnError(f"no return within t_max={t_max}")


@dataclass
class ActionProfile:
    """``g' = T / 2 pi`` with ``g(E_ref) = 0`` and its inverse ``f``."""

    T: object
    E_range: tuple
    E_ref: float = 0.0
    _const: float | None = field(default=None, repr=False)

    def __post_init__(self):
        lo, hi = self.E_range
        grid = np.linspace(lo, hi, 65)
        vals = np.array([float(self.T(e)) for e in grid])
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise ValueError("period must be positive on the energy range")
        if np.ptp(vals) <= 1e-13 * vals.mean():
            self._const = float(vals.mean())

    def g(self, E):
        E = np.asarray(E, dtype=float)
        if self._const is not None:
            return (E - self.E_ref) * self._const / (2 * math.pi)

        def one(e):
            return quad(lambda s: float(self.T(s)) / (2 * math.pi), self.E_ref, e,
                        epsabs=1e-14, epsrel=1e-13, limit=200)[0]

        return np.vectorize(one)(E)

    def f(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self._const is not None:
            return self.E_ref + 2 * math.pi * xi / self._const
        lo, hi = self.E_range
        glo, ghi = float(self.g(lo)), float(self.g(hi))
        if glo >= ghi:
            raise ValueError("g is not increasing; period integration failed")

        def one(x):
            if not glo <= x <= ghi:
                raise ValueError(f"{x} outside the range of g")
            return brentq(lambda e: float(self.g(e)) - x, lo, hi, xtol=1e-14,
                          rtol=4 * np.finfo(float).eps)

        return np.vectorize(one)(xi)


def build_action_profile(T, E_range, E_ref: float = 0.0) -> ActionProfile:
    """``(g, f)`` from the period function ``T(E)``."""
    if callable(T):
        return ActionProfile(T, tuple(E_range), E_ref)
    value = float(T)
    return ActionProfile(lambda e: value, tuple(E_range), E_ref)
