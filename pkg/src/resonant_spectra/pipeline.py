"""End-to-end run: symbols, dynamics, quantization, spectra and comparison."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, config_from_dict
from .dynamics import detect_period
from .eigen import symmetric_eigen
from .fock import FockBasis, weyl_quantize
from .magnetic import magnetic_symbol
from .reduced import ChartFamily, critical_values, reduced_hamiltonian
from .reports import COMPARISON_FIELDS, ArtifactWriter, emit_reports
from .spectral import (Offsets, bs_predict, compare, default_offsets, detect_clusters,
                       extract_subcluster, fit_offsets, shift_bounds)

# acceptance thresholds checked in the summary
SEPARATION_TOL = 0.10
ERROR_TOL = 0.15
SPACING_TOL = 0.10
COUNT_TOL = 0.15
SHIFT_SLACK = 5.0


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, tp, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


@dataclass
class Setup:
    """h-independent part of a run."""

    p2: object
    q: object
    qavg: object
    critical: dict           # E -> values
    period: float
    charts: dict             # F0 -> list of ChartFamily (one per component)

    @property
    def trivial(self) -> bool:
        return self.q.is_zero()


def prepare(cfg: RunConfig, writer: ArtifactWriter | None = None) -> Setup:
    """Symbols, period, critical values and action charts; written as they finish."""
    from .symbols import flow_average

    def emit(name, data):
        if writer is not None:
            writer.json(name, data)

    with _Stage("symbols"):
        model = cfg.model.build()
        p2, q = magnetic_symbol(model)
        qavg = flow_average(q, model.lam)
    emit("symbols.json", {"p2": p2.to_records(), "q": q.to_records(),
                          "q_average": qavg.to_records()})
    with _Stage("dynamics"):
        T = detect_period(p2, cfg.E0)
    emit("dynamics.json", {"E0": cfg.E0, "period": T})
    crit, charts = {}, {}
    if not q.is_zero():
        with _Stage("critical-values"):
            for E in (1.0, 2.0):
                crit[E] = critical_values(reduced_hamiltonian(qavg, E))
        emit("critical_values.json", {f"E={E:g}": v for E, v in crit.items()})
        with _Stage("actions"):
            for i, F0 in enumerate(cfg.F0_list):
                first = ChartFamily.build(qavg, F0, E0=cfg.E0)
                fams = [first] + [ChartFamily.build(qavg, F0, E0=cfg.E0, component=c)
                                  for c in range(1, first.component_count)]
                charts[F0] = fams
                if writer is not None:
                    rows = []
                    for c, fam in enumerate(fams):
                        rows += [dict(r, component=c) for r in fam.to_records((cfg.E0,))]
                    writer.csv(f"actions_F0_{i}.csv", rows)
    return Setup(p2, q, qavg, crit, T, charts)


def _interior_top(basis: FockBasis, degree: int) -> float:
    return basis.h * (basis.n_max - degree + 1)


def spectral_point(cfg: RunConfig, setup: Setup, h: float) -> dict:
    """Spectrum, clusters and comparisons at one value of ``h``."""
    eps = cfg.eps(h) if not setup.trivial else 0.0
    with _Stage("quantization"):
        basis = FockBasis.for_energy(h, cfg.E_max, cfg.margin, degree=max(setup.q.degree, 2))
        H = weyl_quantize(setup.p2.to_float(), basis)
        if not setup.trivial:
            H = H + weyl_quantize(setup.q.to_float(), basis).scale(eps)
    with _Stage("spectrum"):
        eigs = symmetric_eigen(H)
    with _Stage("clusters"):
        top = min(_interior_top(basis, max(setup.q.degree, 2)), cfg.E_max * (1 + cfg.margin))
        report = detect_clusters(eigs, h, eps, max_energy=top + h / 2)
    out = {"h": h, "eps": eps, "n_max": basis.n_max, "dim": basis.dim,
           "tag": f"h_{h:g}", "eigenvalues": eigs, "report": report,
           "clusters": report.to_records(), "comparisons": {}}
    if setup.trivial:
        return out
    with _Stage("clusters"):
        crit1 = setup.critical[1.0]
        deg = setup.qavg.degree / 2
        out["shift_bounds"] = shift_bounds(report, crit1[0], crit1[-1], deg, eps, h,
                                           SHIFT_SLACK)
    band = [c.k for c in report
            if abs(report.unperturbed_center(c.k) - cfg.E0) <= cfg.cluster_band + 1e-12]
    for F0, fams in setup.charts.items():
        with _Stage("predict"):
            wins = {k: extract_subcluster(report, k, F0, eps, cfg.C) for k in band}
            measured = {k: w.eigenvalues for k, w in wins.items()}
            if cfg.offsets == "fit":
                if len(fams) == 1:
                    fit = fit_offsets(fams[0], measured, eps, h, mu1=report.theta)
                    off = fit.offsets
                else:
                    off = default_offsets(fams[0], report.theta, 0.5)
            else:
                base = default_offsets(fams[0])
                off = Offsets(float(cfg.offsets["mu1"]), base.sigma1,
                              float(cfg.offsets["mu2"]), base.sigma2)
            f_lo, f_hi = F0 - 1 / cfg.C, F0 + 1 / cfg.C
            pred = bs_predict(fams, band, None, off, eps, h, F_window=(f_lo, f_hi))
        with _Stage("compare"):
            bounds = {k: w.bounds for k, w in wins.items()}
            rep = compare(pred, measured, bounds=bounds)
        out["comparisons"][F0] = {
            "offsets": off, "rows": rep.rows, "counts": {k: w.count for k, w in wins.items()},
            "unmatched_measured": rep.unmatched_measured.tolist(),
            "unmatched_predicted": rep.unmatched_predicted.tolist(),
            "skipped": list(pred.skipped), "bounds": bounds,
            "predictions": {k: pred.for_cluster(k).tolist() for k in band},
            "max_relative_error": float(rep.relative_errors().max()) if rep.rows else None,
            "max_spacing_deviation": float(np.abs(rep.spacing_ratios() - 1).max())
            if len(rep.spacing_ratios()) else None,
        }
    return out


def _worker(args):
    cfg_dict, h = args
    cfg = config_from_dict(cfg_dict)
    point = spectral_point(cfg, prepare(cfg), h)
    point.pop("report")
    return point


def _point_files(writer: ArtifactWriter, cfg: RunConfig, point: dict) -> list[str]:
    tag = point["tag"]
    files = [writer.csv(f"{tag}/eigenvalues.csv",
                        [{"index": i, "eigenvalue": float(v)}
                         for i, v in enumerate(point["eigenvalues"])]),
             writer.csv(f"{tag}/clusters.csv", point["clusters"],
                        ["k", "center", "width", "size"])]
    if "shift_bounds" in point:
        files.append(writer.csv(f"{tag}/shift_bounds.csv", point["shift_bounds"]))
    for i, (F0, comp) in enumerate(point["comparisons"].items()):
        files.append(writer.csv(f"{tag}/comparison_F0_{i}.csv", comp["rows"], COMPARISON_FIELDS))
        files.append(writer.csv(f"{tag}/window_counts_F0_{i}.csv",
                                [{"k": k, "count": c} for k, c in comp["counts"].items()]))
    return files


def _chart_window(point: dict) -> None:
    comps = point["comparisons"]
    if not comps:
        point["chart_window"], point["chart_predictions"] = None, []
        return
    comp = next(iter(comps.values()))
    ks = sorted(comp["bounds"])
    k = ks[len(ks) // 2]
    cl = next(c for c in point["clusters"] if c["k"] == k)
    lo, hi = comp["bounds"][k]
    point["chart_window"] = {"k": k, "lo": lo, "hi": hi,
                             "cluster_lo": cl["center"] - 0.6 * cl["width"],
                             "cluster_hi": cl["center"] + 0.6 * cl["width"]}
    point["chart_predictions"] = comp["predictions"][k]


def _summarize(cfg: RunConfig, setup: Setup, points: list[dict]) -> dict:
    checks = []

    def check(name, passed, value, threshold, source):
        checks.append({"name": name, "passed": bool(passed), "value": value,
                       "threshold": threshold, "source": source})

    check("harmonic_period", abs(setup.period - 2 * math.pi) < 1e-8, setup.period, 2 * math.pi,
          "dynamics.json")
    if setup.critical:
        c1 = np.array(setup.critical[1.0])
        c2 = np.array(setup.critical[2.0])
        deg = setup.qavg.degree / 2
        ok = len(c1) == len(c2) and np.allclose(c2, c1 * 2 ** deg, atol=1e-8)
        check("critical_values_homogeneity", ok,
              {"E=1": c1.tolist(), "E=2": c2.tolist()}, 1e-8, "critical_values.json")
    for p in points:
        tag = p["tag"]
        seps = np.diff([c["center"] for c in p["clusters"]])
        dev = float(np.abs(seps / p["h"] - 1).max()) if len(seps) else 0.0
        check(f"{tag}/cluster_separation", dev <= SEPARATION_TOL, dev, SEPARATION_TOL,
              f"{tag}/clusters.csv")
        if "shift_bounds" in p:
            bad = [r["k"] for r in p["shift_bounds"] if not r["ok"]]
            check(f"{tag}/shift_bounds", not bad, bad, SHIFT_SLACK, f"{tag}/shift_bounds.csv")
        for i, comp in enumerate(p["comparisons"].values()):
            src = f"{tag}/comparison_F0_{i}.csv"
            e = comp["max_relative_error"]
            check(f"{tag}/F0_{i}/prediction_error", e is not None and e <= ERROR_TOL, e,
                  ERROR_TOL, src)
            s = comp["max_spacing_deviation"]
            check(f"{tag}/F0_{i}/spacing", s is not None and s <= SPACING_TOL, s, SPACING_TOL,
                  src)
    if len(points) >= 2 and setup.charts:
        for i in range(len(setup.charts)):
            scaled = []
            for p in points:
                counts = list(p["comparisons"].values())[i]["counts"].values()
                scaled.append(float(np.mean(list(counts))) * p["h"])
            spread = (max(scaled) - min(scaled)) / max(scaled) if max(scaled) else 1.0
            check(f"F0_{i}/window_count_scaling", spread <= COUNT_TOL,
                  {"count_times_h": scaled, "spread": spread}, COUNT_TOL,
                  [f"{p['tag']}/window_counts_F0_{i}.csv" for p in points])
    offsets = {}
    for p in points:
        for i, comp in enumerate(p["comparisons"].values()):
            o = comp["offsets"]
            f1, s1, f2, s2 = o.canonical()
            offsets[f"{p['tag']}/F0_{i}"] = {"mu1": o.mu1, "mu2": o.mu2, "sigma1": o.sigma1,
                                             "sigma2": o.sigma2, "mu1_frac": f1,
                                             "mu1_shift": s1, "mu2_frac": f2, "mu2_shift": s2}
    return {"passed": all(c["passed"] for c in checks), "checks": checks,
            "offsets": offsets, "config": cfg.to_dict(),
            "prediction": "skipped: zero perturbation" if setup.trivial else "done"}


def run_pipeline(cfg: RunConfig, output=None) -> dict:
    """Run everything and write the artifacts; returns the summary.

    Files are written as each stage finishes, so a failure leaves the
    artifacts of the earlier stages in place.
    """
    writer = ArtifactWriter(output or cfg.output)
    writer.json("config.json", cfg.to_dict())
    setup = prepare(cfg, writer)
    points = []
    if cfg.workers > 1 and len(cfg.h_list) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = pool.map(_worker, [(cfg.to_dict(), h) for h in cfg.h_list])
            for point in results:
                _point_files(writer, cfg, point)
                points.append(point)
    else:
        for h in cfg.h_list:
            point = spectral_point(cfg, setup, h)
            point.pop("report")
            _point_files(writer, cfg, point)
            points.append(point)
    for p in points:
        _chart_window(p)
    summary = _summarize(cfg, setup, points)
    emit_reports({"points": points, "summary": summary}, writer)
    return summary
