"""Flow average of the 1:1 oscillator as a function on the orbit space.

For ``lambda = (1, 1)`` the closed orbits of ``p2`` on ``p2 = E`` form a sphere
of radius ``R = E/2``.  With ``z_j = sqrt(2 rho_j) exp(-i theta_j)``,
``K = rho_1`` and ``phi = theta_1 - theta_2`` the embedding is

    X + iY = sqrt(K (E - K)) exp(i phi),   Z = K - R,

so that ``z1 zb1 = 2(R + Z)``, ``z2 zb2 = 2(R - Z)`` and ``z1 zb2 = 2(X - iY)``.
The reduced symplectic form is ``dK ^ dphi`` and the reduced Hamiltonian flow
of ``F`` is ``r' = grad F x r`` (``phi' = dF/dK``, ``K' = -dF/dphi``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, root

from .symbols import FrequencyVector, PolySymbol, float_coeff

_ONE_ONE = FrequencyVector((1, 1))


class NotInvariantError(ValueError):
    pass


class CriticalLevelError(ValueError):
    """Raised for levels inside the guard band around a critical value."""


class OutOfChartError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tiny dense polynomial helpers in (X, Y, Z)

def _pmul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = (ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2])
            out[k] = out.get(k, 0) + va * vb
    return out


def _ppow(a: dict, n: int) -> dict:
    out = {(0, 0, 0): 1.0 + 0j}
    for _ in range(n):
        out = _pmul(out, a)
    return out


def _sphere_polynomial(qavg: PolySymbol, E: float) -> dict:
    R = E / 2
    zz1 = {(0, 0, 0): 2 * R + 0j, (0, 0, 1): 2.0 + 0j}      # z1 zb1
    zz2 = {(0, 0, 0): 2 * R + 0j, (0, 0, 1): -2.0 + 0j}     # z2 zb2
    z1b2 = {(1, 0, 0): 2.0 + 0j, (0, 1, 0): -2j}            # z1 zb2
    z2b1 = {(1, 0, 0): 2.0 + 0j, (0, 1, 0): 2j}             # z2 zb1
    out: dict = {}
    for (a1, a2, b1, b2), c in qavg.items():
        d = a1 - b1
        if d >= 0:
            mono = _pmul(_pmul(_ppow(z1b2, d), _ppow(zz1, b1)), _ppow(zz2, a2))
        else:
            mono = _pmul(_pmul(_ppow(z2b1, -d), _ppow(zz1, a1)), _ppow(zz2, b2))
        c = float_coeff(c)
        for k, v in mono.items():
            out[k] = out.get(k, 0) + c * v
    return {k: v.real for k, v in out.items() if abs(v) > 0}


@dataclass(frozen=True)
class ReducedHamiltonian:
    """``<q>`` on the orbit sphere ``p2 = E`` as a polynomial in ``(X, Y, Z)``."""

    E: float
    coeffs: dict = field(repr=False)
    qavg: PolySymbol | None = field(default=None, repr=False, compare=False)
    b: tuple | None = None

    @property
    def R(self) -> float:
        return self.E / 2

    @cached_property
    def _arrays(self):
        keys = list(self.coeffs)
        exps = np.array(keys, dtype=int).reshape(-1, 3)
        return exps, np.array([self.coeffs[k] for k in keys], dtype=float)

    @property
    def homogeneity(self) -> float | None:
        """Degree ``m/2`` with ``<q>(E) = E^(m/2) <q>(1)``, if ``<q>`` is homogeneous."""
        if self.qavg is None or self.qavg.is_zero():
            return None
        degs = {sum(k) for k in self.qavg}
        return degs.pop() / 2 if len(degs) == 1 else None

    def value(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        exps, c = self._arrays
        if len(c) == 0:
            return np.zeros(r.shape[:-1])
        return np.prod(r[..., None, :] ** exps, axis=-1) @ c

    def grad(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        exps, c = self._arrays
        out = np.zeros(r.shape)
        if len(c) == 0:
            return out
        for i in range(3):
            e = exps.copy()
            fac = e[:, i].astype(float)
            e[:, i] = np.maximum(e[:, i] - 1, 0)
            out[..., i] = np.prod(r[..., None, :] ** e, axis=-1) @ (c * fac)
        return out

    def tangential_grad(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        g = self.grad(r)
        n = r / np.linalg.norm(r, axis=-1, keepdims=True)
        return g - np.sum(g * n, axis=-1, keepdims=True) * n

    def point(self, K, phi) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        phi = np.asarray(phi, dtype=float)
        s = np.sqrt(np.clip(K * (self.E - K), 0, None))
        return np.stack(np.broadcast_arrays(s * np.cos(phi), s * np.sin(phi), K - self.R), axis=-1)

    def __call__(self, K, phi) -> np.ndarray:
        """``q_red(K, phi)``."""
        return self.value(self.point(K, phi))

    def phase_point(self, K, phi) -> np.ndarray:
        """A point ``(x1, x2, xi1, xi2)`` of ``p2 = E`` on the orbit labelled ``(K, phi)``."""
        K = np.asarray(K, dtype=float)
        phi = np.asarray(phi, dtype=float)
        z1 = np.sqrt(2 * K) + 0j
        z2 = np.sqrt(2 * (self.E - K)) * np.exp(1j * phi)
        return np.stack([z1.real, z2.real, z1.imag, z2.imag], axis=-1)

    def flow(self, r) -> np.ndarray:
        return np.cross(self.grad(r), r)

    def scaled(self, E: float) -> "ReducedHamiltonian":
        if self.qavg is None:
            raise ValueError("rescaling needs the averaged symbol")
        return reduced_hamiltonian(self.qavg, E, b=self.b)


def reduced_hamiltonian(qavg: PolySymbol, E: float, b=None) -> ReducedHamiltonian:
    """Restrict a flow-invariant symbol of the 1:1 oscillator to the orbit sphere."""
    if E <= 0:
        raise ValueError("E must be positive")
    for key in qavg:
        if _ONE_ONE.detuning(key) != 0:
            raise NotInvariantError("symbol is not invariant under the 1:1 flow")
    return ReducedHamiltonian(E=float(E), coeffs=_sphere_polynomial(qavg, float(E)),
                              qavg=qavg, b=b)


# ---------------------------------------------------------------------------
# critical values


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    t = math.pi * (1 + 5 ** 0.5) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(t), s * np.sin(t), z], axis=-1)


def _frame(n: np.ndarray) -> np.ndarray:
    """Orthonormal matrix whose first row is ``n``."""
    n = n / np.linalg.norm(n)
    a = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(n, a)
    u /= np.linalg.norm(u)
    return np.array([n, u, np.cross(n, u)])


@dataclass(frozen=True)
class CriticalPoint:
    point: np.ndarray
    value: float
    kind: str  # "max", "min", "saddle" or "degenerate"


def critical_points(red: ReducedHamiltonian, n_seeds: int = 600, tol: float = 1e-10):
    """Critical points of ``q_red`` on the sphere by root-finding from a seed grid."""
    R = red.R
    scale = np.abs(red.value(R * _fibonacci_sphere(2000))).max()
    if scale == 0:
        raise ValueError("reduced Hamiltonian vanishes identically")
    found: list[np.ndarray] = []
    seeds = R * _fibonacci_sphere(n_seeds)
    seeds = np.vstack([seeds, [[0, 0, R], [0, 0, -R]]])
    for s in seeds:
        M = _frame(s)

        def embed(uv, M=M):
            u, v = uv
            return R * (M.T @ np.array([math.cos(u) * math.cos(v), math.sin(u) * math.cos(v),
                                        math.sin(v)]))

        def grad_uv(uv, M=M):
            u, v = uv
            g = red.grad(embed(uv))
            du = R * (M.T @ np.array([-math.sin(u) * math.cos(v), math.cos(u) * math.cos(v), 0]))
            dv = R * (M.T @ np.array([-math.cos(u) * math.sin(v), -math.sin(u) * math.sin(v),
                                      math.cos(v)]))
            return np.array([g @ du, g @ dv]) / scale

        if np.linalg.norm(grad_uv((0.0, 0.0))) > 0.3:
            continue
        sol = root(grad_uv, np.zeros(2), method="hybr", options={"xtol": 1e-14})
        uv = sol.x
        if abs(uv[0]) > 1.0 or abs(uv[1]) > 1.0:
            continue
        p = embed(uv)
        if np.linalg.norm(red.tangential_grad(p)) > 1e-7 * scale / R:
            continue
        if all(np.linalg.norm(p - f) > 1e-5 * R for f in found):
            found.append(p)
    out = []
    for p in found:
        out.append(CriticalPoint(point=p, value=float(red.value(p)), kind=_classify(red, p)))
    return sorted(out, key=lambda c: c.value)


def _classify(red: ReducedHamiltonian, p: np.ndarray) -> str:
    M = _frame(p)
    R = red.R
    d = 1e-4

    def f(u, v):
        return float(red.value(R * (M.T @ np.array([math.cos(u) * math.cos(v),
                                                      math.sin(u) * math.cos(v), math.sin(v)]))))

    f0 = f(0, 0)
    fuu = (f(d, 0) - 2 * f0 + f(-d, 0)) / d ** 2
    fvv = (f(0, d) - 2 * f0 + f(0, -d)) / d ** 2
    fuv = (f(d, d) - f(d, -d) - f(-d, d) + f(-d, -d)) / (4 * d ** 2)
    det = fuu * fvv - fuv ** 2
    size = abs(fuu) + abs(fvv) + abs(fuv)
    if size == 0 or abs(det) < 1e-6 * size ** 2:
        return "degenerate"
    if det < 0:
        return "saddle"
    return "max" if fuu < 0 else "min"


def critical_values(red: ReducedHamiltonian, tol: float = 1e-7) -> list[float]:
    """Sorted distinct critical values of ``q_red`` on the sphere."""
    pts = critical_points(red)
    vals = sorted(c.value for c in pts)
    big = max((abs(v) for v in vals), default=0.0)
    vals = [0.0 if abs(v) < 1e-14 * big else v for v in vals]
    spread = (vals[-1] - vals[0]) if vals else 0.0
    out: list[float] = []
    for v in vals:
        if not out or abs(v - out[-1]) > tol * max(spread, 1.0):
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# level curves


@dataclass(frozen=True)
class LevelComponent:
    """One closed orbit of the reduced flow on ``q_red = F``."""

    F: float
    period: float
    action: float          # symplectic area of the adjacent {q_red < F} disk
    points: np.ndarray = field(repr=False)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


def _level_seeds(red: ReducedHamiltonian, F: float, n_lines: int = 48,
                 n_samples: int = 400) -> list[np.ndarray]:
    R = red.R
    seeds = []
    t = np.linspace(0, math.pi, n_samples)
    for axis in np.eye(3):
        M = _frame(axis)
        for phi in np.linspace(0, 2 * math.pi, n_lines, endpoint=False):
            # meridian from +axis to -axis
            loc = np.stack([np.cos(t), np.sin(t) * math.cos(phi), np.sin(t) * math.sin(phi)], -1)
            pts = R * loc @ M
            g = red.value(pts) - F
            idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
            for i in idx:
                def fn(s, phi=phi, M=M):
                    p = R * np.array([math.cos(s), math.sin(s) * math.cos(phi),
                                      math.sin(s) * math.sin(phi)]) @ M
                    return float(red.value(p)) - F
                s = brentq(fn, t[i], t[i + 1], xtol=1e-15)
                seeds.append(R * np.array([math.cos(s), math.sin(s) * math.cos(phi),
                                           math.sin(s) * math.sin(phi)]) @ M)
    return seeds


def _trace(red: ReducedHamiltonian, start: np.ndarray, F: float, rtol: float = 1e-12,
           n_points: int = 1024):
    """Integrate the reduced flow from ``start`` once around its closed orbit.

    Returns ``(period, raw_action, points)``; ``raw_action`` is the integral of
    a primitive of ``dK ^ dphi`` whose only singularity is a probe point far
    from the level set.
    """
    R = red.R
    v0 = red.flow(start)
    speed = np.linalg.norm(v0)
    if speed == 0:
        raise CriticalLevelError("start point is critical")
    probes = R * _fibonacci_sphere(64)
    P = probes[np.argmax(np.abs(red.value(probes) - F))]
    M = _frame(P)[[1, 2, 0]]  # rows x', y', z' with z' along P

    def rhs(t, y):
        r = y[:3]
        dr = red.flow(r)
        rp, drp = M @ r, M @ dr
        dA = (rp[0] * drp[1] - rp[1] * drp[0]) / (R - rp[2])
        return np.concatenate([dr, [dA]])

    def section(t, y):
        return float((y[:3] - start) @ v0)

    section.direction = 1.0
    y0 = np.concatenate([start, [0.0]])
    t_chunk = 4 * math.pi * R / speed
    t0 = 0.0
    atol = rtol * R * 1e-2
    for _ in range(400):
        sol = solve_ivp(rhs, (t0, t0 + t_chunk), y0, method="DOP853", rtol=rtol, atol=atol,
                        events=section)
        if not sol.success:
            raise RuntimeError(f"reduced flow integration failed: {sol.message}")
        for te, ye in zip(sol.t_events[0], sol.y_events[0]):
            if te > 1e-9 and np.linalg.norm(ye[:3] - start) < 1e-4 * R:
                if n_points == 0:
                    return float(te), float(ye[3]), start[None, :]
                ts = np.linspace(0, te, n_points, endpoint=False)
                pts = solve_ivp(rhs, (0, te), np.concatenate([start, [0.0]]), method="DOP853",
                                rtol=rtol, atol=atol, t_eval=ts).y[:3].T
                return float(te), float(ye[3]), pts
        y0 = sol.y[:, -1]
        t0 += t_chunk
    raise RuntimeError("no return to the start point detected")


def _guard(red: ReducedHamiltonian, F: float, crit: list[float] | None, guard: float):
    crit = critical_values(red) if crit is None else crit
    spread = crit[-1] - crit[0]
    if not crit[0] < F < crit[-1]:
        raise OutOfChartError(f"level {F} outside the range [{crit[0]}, {crit[-1]}]")
    for c in crit:
        if abs(F - c) < guard * spread:
            raise CriticalLevelError(f"level {F} too close to critical value {c}")
    return crit


def level_components(red: ReducedHamiltonian, F: float, crit: list[float] | None = None,
                     guard: float = 1e-3, rtol: float = 1e-12) -> list[LevelComponent]:
    """All connected components of ``q_red = F``, each traced once."""
    _guard(red, F, crit, guard)
    seeds = _level_seeds(red, F)
    if not seeds:
        raise OutOfChartError(f"no level curve found at {F}")
    comps: list[LevelComponent] = []
    unassigned = list(seeds)
    E = red.E
    while unassigned:
        s = unassigned.pop(0)
        T, raw, pts = _trace(red, s, F, rtol=rtol)
        step = np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1))
        comps.append(LevelComponent(F=F, period=T, action=raw % (2 * math.pi * E), points=pts))
        unassigned = [u for u in unassigned
                      if np.min(np.linalg.norm(pts - u, axis=1)) > 2 * step]
    comps.sort(key=lambda c: tuple(np.round(c.centroid, 6)))
    return comps


@dataclass(frozen=True)
class TorusActions:
    xi2: float
    T_red: float
    component_count: int
    action: float


def _match(comps: list[LevelComponent], ref: np.ndarray | None) -> LevelComponent:
    if ref is None or len(comps) == 1:
        return comps[0]
    d = [np.linalg.norm(c.centroid / np.linalg.norm(c.centroid) - ref) for c in comps]
    return comps[int(np.argmin(d))]


def torus_actions(red: ReducedHamiltonian, F: float, base_F0: float,
                  base: ReducedHamiltonian | None = None, component: int = 0,
                  guard: float = 1e-3) -> TorusActions:
    """Normalized second action of the torus ``p2 = E, <q> = F``.

    ``xi2 = (A(E, F) - A(E0, F0)) / 2 pi`` where ``A`` is the symplectic area of
    the sublevel disk bounded by the chosen component.  ``base`` is the reduced
    Hamiltonian at the reference energy (defaults to ``red``).
    """
    base = red if base is None else base
    base_comps = level_components(base, base_F0, guard=guard)
    b = base_comps[component]
    ref = b.centroid / np.linalg.norm(b.centroid)
    comps = level_components(red, F, guard=guard)
    c = _match(comps, ref)
    return TorusActions(xi2=(c.action - b.action) / (2 * math.pi), T_red=c.period,
                        component_count=len(comps), action=c.action)


def project_to_level(red: ReducedHamiltonian, r: np.ndarray, F: float,
                     iters: int = 50) -> np.ndarray:
    """Newton-correct ``r`` onto ``q_red = F`` along the tangential gradient."""
    R = red.R
    r = R * r / np.linalg.norm(r)
    for _ in range(iters):
        g = red.tangential_grad(r)
        res = float(red.value(r)) - F
        gg = float(g @ g)
        if gg == 0:
            raise CriticalLevelError("hit a critical point while correcting")
        r = r - res * g / gg
        r = R * r / np.linalg.norm(r)
        if abs(res) < 1e-15 * max(1.0, abs(F)):
            break
    return r


@dataclass
class ChartFamily:
    """Tabulated actions of one family of tori ``p2 = E, <q> = F``.

    Uses homogeneity ``<q>(E) = E^m <q>(1)``: at energy ``E`` the level ``F``
    corresponds to the unit-energy level ``f = F / E^m`` with area
    ``A(E, F) = E * A1(f)`` and reduced period ``T(E, F) = T1(f) / E^(m-1)``.

    ``xi1 = E - E0`` (the harmonic flow has period ``2 pi``) and
    ``xi2 = (A(E, F) - S2) / 2 pi`` with ``S2 = A(E0, F0)``.
    """

    red1: ReducedHamiltonian
    F0: float
    E0: float
    f_grid: np.ndarray
    areas: np.ndarray
    periods: np.ndarray
    component: int
    component_count: int
    critical: list

    @classmethod
    def build(cls, qavg: PolySymbol, F0: float, E0: float = 1.0, component: int = 0,
              n_grid: int = 161, guard: float = 1e-3, margin: float = 0.02) -> "ChartFamily":
        red1 = reduced_hamiltonian(qavg, 1.0)
        m = red1.homogeneity
        if m is None:
            raise ValueError("chart family needs a homogeneous averaged symbol")
        crit = critical_values(red1)
        spread = crit[-1] - crit[0]
        f0 = F0 / E0 ** m
        _guard(red1, f0, crit, guard)
        lo = max(c for c in crit if c < f0)
        hi = min(c for c in crit if c > f0)
        pad = max(guard, margin) * spread
        f_grid = np.linspace(lo + pad, hi - pad, n_grid)
        comps = level_components(red1, f0, crit=crit, guard=guard)
        if component >= len(comps):
            raise ValueError(f"level has only {len(comps)} components")
        # continue the chosen component across the grid, outward from f0
        areas = np.empty(n_grid)
        periods = np.empty(n_grid)
        i0 = int(np.searchsorted(f_grid, f0))
        start0 = comps[component].points[0]
        for order in (range(i0, n_grid), range(i0 - 1, -1, -1)):
            r = start0
            for i in order:
                r = project_to_level(red1, r, f_grid[i])
                T, raw, _ = _trace(red1, r, f_grid[i], n_points=0)
                periods[i] = T
                areas[i] = raw % (2 * math.pi)
        # areas are continuous in f; repair any wrap at 0 / 2 pi
        areas = np.unwrap(areas, period=2 * math.pi)
        chart = cls(red1=red1, F0=F0, E0=E0, f_grid=f_grid, areas=areas, periods=periods,
                    component=component, component_count=len(comps), critical=crit)
        return chart

    @cached_property
    def degree(self) -> float:
        return self.red1.homogeneity

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.f_grid, self.areas, self.periods)

    @cached_property
    def _period_spline(self):
        from scipy.interpolate import CubicSpline
        return CubicSpline(self.f_grid, self.periods)

    @property
    def S1(self) -> float:
        return 2 * math.pi * self.E0

    @cached_property
    def S2(self) -> float:
        return self.area(self.E0, self.F0)

    def _unit_level(self, E, F):
        f = np.asarray(F, dtype=float) / np.asarray(E, dtype=float) ** self.degree
        lo, hi = self.f_grid[0], self.f_grid[-1]
        tol = 1e-12 * (hi - lo)
        if np.any(f < lo - tol) or np.any(f > hi + tol):
            raise OutOfChartError("level outside the charted regular band")
        return np.clip(f, lo, hi)

    def area(self, E, F):
        return np.asarray(E) * self._spline(self._unit_level(E, F))

    def period(self, E, F):
        return self._period_spline(self._unit_level(E, F)) / np.asarray(E) ** (self.degree - 1)

    def actions(self, E, F):
        """``(xi1, xi2)`` of the torus ``(E, F)``."""
        return np.asarray(E) - self.E0, (self.area(E, F) - self.S2) / (2 * math.pi)

    def level_range(self, E) -> tuple[float, float]:
        s = E ** self.degree
        return self.f_grid[0] * s, self.f_grid[-1] * s

    def invert(self, xi1, xi2):
        """``(E, F)`` with the given normalized actions."""
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        E = self.E0 + xi1
        if np.any(E <= 0):
            raise OutOfChartError("energy must stay positive")
        target = (2 * math.pi * xi2 + self.S2) / E
        lo, hi = self.areas[0], self.areas[-1]
        if np.any(target < lo) or np.any(target > hi):
            raise OutOfChartError("actions outside the charted region")
        f = np.vectorize(lambda a: brentq(lambda s: float(self._spline(s)) - a,
                                          self.f_grid[0], self.f_grid[-1], xtol=1e-15,
                                          rtol=4 * np.finfo(float).eps))(target)
        return E, f * E ** self.degree

    def to_records(self, energies=(1.0,)) -> list[dict]:
        recs = []
        for E in energies:
            for f, T in zip(self.f_grid, self.periods):
                F = f * E ** self.degree
                xi1, xi2 = self.actions(E, F)
                recs.append({"E": float(E), "F": float(F), "xi1": float(xi1), "xi2": float(xi2),
                             "T_red": float(self.period(E, F)),
                             "component_count": self.component_count})
        return recs


def invert_actions(chart: ChartFamily, xi1, xi2):
    return chart.invert(xi1, xi2)
