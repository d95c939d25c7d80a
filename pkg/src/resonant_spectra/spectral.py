"""Clusters, subclusters and the Bohr-Sommerfeld comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .eigen import hermitian_eigen
from .fock import FockOperator
from .reduced import ChartFamily, OutOfChartError


class RegimeError(ValueError):
    """Cluster widths reach the inter-cluster gap: eps is too large for h."""


class WindowError(ValueError):
    pass


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class Cluster:
    k: int
    center: float
    width: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class ClusterReport:
    clusters: tuple
    h: float
    eps: float
    gap_threshold: float
    theta: float = -1.0        # centers ~ h (k - theta)

    def __getitem__(self, k: int) -> Cluster:
        for c in self.clusters:
            if c.k == k:
                return c
        raise KeyError(f"cluster {k} not detected")

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def ks(self) -> list[int]:
        return [c.k for c in self.clusters]

    def unperturbed_center(self, k: int) -> float:
        return self.h * (k - self.theta)

    def separations(self) -> np.ndarray:
        c = np.array([cl.center for cl in self.clusters])
        return np.diff(c)

    def to_records(self) -> list[dict]:
        return [{"k": c.k, "center": c.center, "width": c.width, "size": c.size}
                for c in self.clusters]


def detect_clusters(eigs, h: float, eps: float = 0.0, gap_threshold: float | None = None,
                    max_energy: float | None = None) -> ClusterReport:
    """Split a sorted spectrum at gaps wider than ``gap_threshold`` (default ``h/2``).

    Clusters are numbered consecutively from the lowest one (``k = 0`` is the
    ground cluster of the Fock basis); ``theta`` is fitted from the centers.
    Only eigenvalues up to ``max_energy`` are used, and a cluster cut by that
    limit is dropped.
    """
    gap = h / 2 if gap_threshold is None else gap_threshold
    eigs = np.sort(np.asarray(eigs, dtype=float))
    above = np.zeros(0)
    if max_energy is not None:
        above = eigs[eigs > max_energy]
        eigs = eigs[eigs <= max_energy]
    if len(eigs) == 0:
        return ClusterReport((), h, eps, gap)
    cuts = np.nonzero(np.diff(eigs) > gap)[0] + 1
    groups = np.split(eigs, cuts)
    last = groups[-1]
    if len(above) and above[0] - last[-1] <= gap and last[-1] - last[0] < gap:
        # the energy cut went through a cluster
        groups = groups[:-1]
    clusters = []
    for k, g in enumerate(groups):
        width = float(g[-1] - g[0])
        if width >= gap:
            raise RegimeError(f"cluster {k} has width {width:.3g} >= gap threshold {gap:.3g}")
        clusters.append(Cluster(k=k, center=float(g.mean()), width=width, eigenvalues=g))
    ks = np.array([c.k for c in clusters])
    centers = np.array([c.center for c in clusters])
    theta = float(np.mean(ks - centers / h))
    if np.any(np.abs(centers / h - (ks - theta)) > 0.25):
        raise RegimeError("cluster centers do not follow a progression of step h")
    return ClusterReport(tuple(clusters), h, eps, gap, theta)


@dataclass(frozen=True)
class SubclusterWindow:
    k: int
    F0: float
    eps: float
    C: float
    center: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def bounds(self) -> tuple[float, float]:
        r = self.eps / self.C
        return self.center + self.eps * self.F0 - r, self.center + self.eps * self.F0 + r

    @property
    def count(self) -> int:
        return len(self.eigenvalues)


def extract_subcluster(report: ClusterReport, k: int, F0: float, eps: float, C: float = 10.0,
                       interior: range | None = None) -> SubclusterWindow:
    """Eigenvalues of cluster ``k`` with ``|z - h(k - theta) - eps F0| < eps / C``."""
    if C <= 1:
        raise ValueError("window constant C must exceed 1")
    if interior is not None and k not in interior:
        raise WindowError(f"cluster {k} is not interior")
    cl = report[k]
    center = report.unperturbed_center(k)
    lo, hi = center + eps * F0 - eps / C, center + eps * F0 + eps / C
    if lo < center - report.gap_threshold or hi > center + report.gap_threshold:
        raise WindowError("window leaves the cluster's gap neighbourhood")
    ev = cl.eigenvalues
    return SubclusterWindow(k, F0, eps, C, center, ev[(ev > lo) & (ev < hi)])


def perturbation_oracle(k: int, Q: FockOperator, eps: float, h: float | None = None) -> np.ndarray:
    """First-order degenerate perturbation theory: ``h(k+1) + eps eig(P_k Q P_k)``."""
    if k not in Q.interior_clusters():
        raise WindowError(f"cluster {k} is not interior")
    h = Q.basis.h if h is None else h
    return h * (k + 1) + eps * hermitian_eigen(Q.block(k))


# ---------------------------------------------------------------------------
# Bohr-Sommerfeld predictions


@dataclass(frozen=True)
class Offsets:
    """``xi1(k) = h(k - mu1) - sigma1`` and ``xi2(l) = h(l - mu2) - sigma2``."""

    mu1: float
    sigma1: float
    mu2: float
    sigma2: float

    def canonical(self) -> tuple[float, int, float, int]:
        """``(mu1 mod 1, shift1, mu2 mod 1, shift2)`` with ``mu = frac - shift``."""
        f1, f2 = self.mu1 % 1.0, self.mu2 % 1.0
        return f1, int(round(f1 - self.mu1)), f2, int(round(f2 - self.mu2))

    def xi1(self, k, h):
        return h * (np.asarray(k, dtype=float) - self.mu1) - self.sigma1

    def xi2(self, ell, h):
        return h * (np.asarray(ell, dtype=float) - self.mu2) - self.sigma2

    def ell_coordinate(self, xi2, h):
        """Continuous ``l`` with ``xi2(l) = xi2``."""
        return (np.asarray(xi2) + self.sigma2) / h + self.mu2


def default_offsets(chart: ChartFamily, mu1: float = 0.0, mu2: float = 0.0) -> Offsets:
    return Offsets(mu1, chart.S1 / (2 * math.pi), mu2, chart.S2 / (2 * math.pi))


@dataclass(frozen=True)
class PredictionGrid:
    k: np.ndarray
    ell: np.ndarray
    component: np.ndarray
    value: np.ndarray
    skipped: tuple = ()

    def for_cluster(self, k: int) -> np.ndarray:
        return np.sort(self.value[self.k == k])


def _ell_range(chart: ChartFamily, E: float, Flo: float, Fhi: float, off: Offsets, h: float):
    lo, hi = chart.level_range(E)
    Flo, Fhi = max(Flo, lo), min(Fhi, hi)
    if Flo >= Fhi:
        return range(0)
    _, x_lo = chart.actions(E, Flo)
    _, x_hi = chart.actions(E, Fhi)
    a, b = off.ell_coordinate(x_lo, h), off.ell_coordinate(x_hi, h)
    return range(int(math.ceil(min(a, b))), int(math.floor(max(a, b))) + 1)


def bs_predict(charts, k_list, ell_list, offsets: Offsets, eps: float, h: float,
               F_window: tuple | None = None) -> PredictionGrid:
    """Leading-order quasi-eigenvalues ``E(xi1) + eps F(xi1, xi2)``.

    ``charts`` is one :class:`ChartFamily` or a list (one per component).  If
    ``ell_list`` is None the ``l`` range is chosen per cluster so that
    ``F`` covers ``F_window`` (unit-energy values, scaled with ``E``).
    """
    charts = [charts] if isinstance(charts, ChartFamily) else list(charts)
    ks, ls, cs, vs, skipped = [], [], [], [], []
    for ci, chart in enumerate(charts):
        for k in k_list:
            xi1 = float(offsets.xi1(k, h))
            E = chart.E0 + xi1
            if ell_list is None:
                if F_window is None:
                    lo, hi = chart.level_range(E)
                else:
                    s = E ** chart.degree
                    lo, hi = F_window[0] * s, F_window[1] * s
                ells = _ell_range(chart, E, lo, hi, offsets, h)
            else:
                ells = ell_list
            for ell in ells:
                try:
                    E_, F = chart.invert(xi1, float(offsets.xi2(ell, h)))
                except OutOfChartError:
                    skipped.append((k, ell, ci))
                    continue
                ks.append(k)
                ls.append(ell)
                cs.append(ci)
                vs.append(float(E_) + eps * float(F))
    return PredictionGrid(np.array(ks, dtype=int), np.array(ls, dtype=int),
                          np.array(cs, dtype=int), np.array(vs), tuple(skipped))


@dataclass(frozen=True)
class FitResult:
    offsets: Offsets
    residual: float            # rms energy error
    n_measured: int

    @property
    def canonical(self):
        return self.offsets.canonical()


def _ell_residuals(chart: ChartFamily, measured: dict, mu1: float, sig1: float, sig2: float,
                   eps: float, h: float):
    us, ws = [], []
    for k, z in measured.items():
        E = chart.E0 + h * (k - mu1) - sig1
        F = (np.asarray(z) - E) / eps
        lo, hi = chart.level_range(E)
        F = F[(F > lo) & (F < hi)]
        if len(F) == 0:
            continue
        _, xi2 = chart.actions(E, F)
        us.append((xi2 + sig2) / h)
        ws.append(np.full(len(F), 1.0))
    if not us:
        return np.zeros(0)
    return np.concatenate(us)


def _best_mu2(u: np.ndarray) -> tuple[float, float]:
    """``mu2`` (mod 1) minimizing the distance of ``u + mu2`` to the integers."""
    ang = np.angle(np.mean(np.exp(2j * math.pi * u)))
    mu2 = (-ang / (2 * math.pi)) % 1.0
    d = (u + mu2) - np.round(u + mu2)
    return mu2, float(np.mean(d ** 2))


def fit_offsets(chart: ChartFamily, measured: dict, eps: float, h: float,
                sigma: tuple | None = None, mu1: float | None = None,
                mu1_range=(-2.0, 2.0), step: float = 0.002) -> FitResult:
    """Least-squares Maslov-type offsets from subcluster eigenvalues.

    ``measured`` maps cluster index ``k`` to its window eigenvalues.  The
    base-cycle terms ``sigma = (S1, S2) / 2 pi`` come from the chart unless
    given; ``mu2`` is fitted modulo 1.  ``mu1`` is fitted too unless given
    (a narrow window barely separates a shift of ``mu1`` from one of
    ``mu2``, so passing ``mu1 = -theta`` from the cluster centers is more
    robust).
    """
    n = sum(len(v) for v in measured.values())
    if n < 8 or len(measured) < 2:
        raise FitError("need at least 8 measured values across 2 clusters")
    base = default_offsets(chart)
    sig1, sig2 = (base.sigma1, base.sigma2) if sigma is None else sigma
    best = None
    grid = np.arange(mu1_range[0], mu1_range[1], step) if mu1 is None else [mu1]
    for m1 in grid:
        u = _ell_residuals(chart, measured, m1, sig1, sig2, eps, h)
        if len(u) < 0.75 * n:
            continue
        mu2, loss = _best_mu2(u)
        if best is None or loss < best[2]:
            best = (m1, mu2, loss)
    if best is None:
        raise FitError("no offset puts the measurements inside the chart")

    def energy_loss(x):
        if mu1 is not None:
            x = (mu1, x[-1])
        off = Offsets(x[0], sig1, x[1], sig2)
        errs = []
        for k, z in measured.items():
            pred = bs_predict(chart, [k], None, off, eps, h).for_cluster(k)
            if len(pred) == 0:
                return 1e6
            z = np.asarray(z)
            j = np.clip(np.searchsorted(pred, z), 1, len(pred) - 1)
            errs.append(np.minimum(np.abs(z - pred[j - 1]), np.abs(z - pred[j])))
        e = np.concatenate(errs)
        return float(np.mean(e ** 2))

    x0 = np.array(best[:2]) if mu1 is None else np.array([best[1]])
    res = minimize(energy_loss, x0, method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-30, "maxiter": 2000})
    x = res.x if mu1 is None else np.array([mu1, res.x[0]])
    off = Offsets(float(x[0]), sig1, float(x[1] % 1.0), sig2)
    return FitResult(off, math.sqrt(energy_loss(res.x)), n)


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class PredictionReport:
    rows: list
    unmatched_measured: np.ndarray
    unmatched_predicted: np.ndarray
    offsets: Offsets | None = None

    @property
    def errors(self) -> np.ndarray:
        return np.array([r["error"] for r in self.rows])

    def relative_errors(self) -> np.ndarray:
        """Errors over the local predicted spacing."""
        return np.array([r["error"] / r["spacing_predicted"] for r in self.rows
                         if r["spacing_predicted"]])

    def spacing_ratios(self) -> np.ndarray:
        return np.array([r["spacing_measured"] / r["spacing_predicted"] for r in self.rows
                         if r["spacing_predicted"] and r["spacing_measured"] is not None])

    def second_differences(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        sel = sorted((r for r in self.rows if r["k"] == k), key=lambda r: r["predicted"])
        p = np.array([r["predicted"] for r in sel])
        m = np.array([r["measured"] for r in sel])
        return np.diff(p, 2), np.diff(m, 2)


def compare(predicted: PredictionGrid | np.ndarray, measured, k: int | None = None,
            cap: float = 0.5, bounds: dict | None = None) -> PredictionReport:
    """Greedy injective nearest matching of predictions to measurements.

    A pair is accepted only if closer than ``cap`` times the local predicted
    spacing.  ``measured`` is an array (with ``k``) or a dict ``k -> array``.
    ``bounds`` (``k -> (lo, hi)``) drops predictions outside the measured window
    after the local spacings are taken.
    """
    if isinstance(predicted, PredictionGrid):
        groups = {}
        for kk in np.unique(predicted.k):
            sel = predicted.k == kk
            groups[int(kk)] = (predicted.value[sel], predicted.ell[sel], predicted.component[sel])
    else:
        p = np.sort(np.asarray(predicted, dtype=float))
        kk = -1 if k is None else k
        groups = {kk: (p, np.arange(len(p)), np.zeros(len(p), dtype=int))}
    if not isinstance(measured, dict):
        measured = {next(iter(groups)) if k is None else k: np.asarray(measured, dtype=float)}
    rows, um, up = [], [], []
    for kk, (pv, pl, pc) in groups.items():
        z = np.sort(np.asarray(measured.get(kk, np.zeros(0)), dtype=float))
        order = np.argsort(pv)
        pv, pl, pc = pv[order], pl[order], pc[order]
        spacing = _local_spacing(pv)
        if bounds is not None and kk in bounds:
            lo, hi = bounds[kk]
            inside = (pv > lo) & (pv < hi)
            # keep one neighbour on each side for the spacing column
            nb = inside | np.roll(inside, 1) | np.roll(inside, -1)
        else:
            inside = nb = np.ones(len(pv), dtype=bool)
        pairs = sorted(((abs(a - b), i, j) for i, a in enumerate(pv) for j, b in enumerate(z)
                        if nb[i] and abs(a - b) < cap * spacing[i]))
        used_p, used_m, match = set(), set(), {}
        for d, i, j in pairs:
            if i in used_p or j in used_m:
                continue
            used_p.add(i)
            used_m.add(j)
            match[i] = j
        for i in sorted(match):
            j = match[i]
            nxt = i + 1
            sm = None
            if nxt in match:
                sm = float(z[match[nxt]] - z[j])
            rows.append({"k": kk, "ell": int(pl[i]), "component": int(pc[i]),
                         "predicted": float(pv[i]), "measured": float(z[j]),
                         "error": float(abs(pv[i] - z[j])),
                         "spacing_measured": sm,
                         "spacing_predicted": float(pv[nxt] - pv[i]) if nxt < len(pv) else
                         float(spacing[i])})
        um.extend(z[j] for j in range(len(z)) if j not in used_m)
        up.extend(pv[i] for i in range(len(pv)) if i not in used_p and inside[i])
    return PredictionReport(rows, np.array(um), np.array(up))


def _local_spacing(p: np.ndarray) -> np.ndarray:
    if len(p) < 2:
        return np.full(len(p), np.inf)
    d = np.diff(p)
    left = np.concatenate([[d[0]], d])
    right = np.concatenate([d, [d[-1]]])
    return np.minimum(left, right)


def shift_bounds(report: ClusterReport, qmin_unit: float, qmax_unit: float, degree: float,
                 eps: float, h: float, slack: float = 5.0) -> list[dict]:
    """Check ``eps min<q> - s <= z - h(k+1) <= eps max<q> + s`` with ``s = slack (eps^2 + h^2)``.

    ``qmin_unit``/``qmax_unit`` are the extreme values of ``<q>`` at unit energy.
    """
    out = []
    s = slack * (eps ** 2 + h ** 2)
    for c in report:
        E = report.unperturbed_center(c.k)
        lo = eps * qmin_unit * E ** degree - s
        hi = eps * qmax_unit * E ** degree + s
        shift = c.eigenvalues - E
        out.append({"k": c.k, "E": E, "min_shift": float(shift.min()),
                    "max_shift": float(shift.max()), "lower": lo, "upper": hi,
                    "ok": bool(shift.min() >= lo and shift.max() <= hi)})
    return out
