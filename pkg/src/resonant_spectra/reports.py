"""Artifact files: CSV tables, the JSON summary and an SVG spectrum chart."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

COMPARISON_FIELDS = ("k", "ell", "component", "predicted", "measured", "error",
                     "spacing_measured", "spacing_predicted")
_INT_FIELDS = {"k", "ell", "component"}


class ReportError(OSError):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


class ArtifactWriter:
    """All files of a run go through one writer, so writes are serialized."""

    def __init__(self, root):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ReportError(f"cannot create output directory {self.root}: {exc}") from exc
        self.written: list[str] = []

    def _path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def text(self, name: str, content: str) -> str:
        try:
            self._path(name).write_text(content)
        except OSError as exc:
            raise ReportError(f"cannot write {name}: {exc}") from exc
        self.written.append(name)
        return name

    def json(self, name: str, data) -> str:
        return self.text(name, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")

    def csv(self, name: str, rows: list[dict], fields=None) -> str:
        return self.text(name, to_csv(rows, fields))


def to_csv(rows: list[dict], fields=None) -> str:
    fields = list(fields or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f)) for f in fields])
    return buf.getvalue()


def parse_comparison_csv(text: str) -> list[dict]:
    """Rows of a comparison table, typed per the column schema."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COMPARISON_FIELDS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    out = []
    for r in reader:
        row = {}
        for f in COMPARISON_FIELDS:
            v = r[f]
            if v == "":
                row[f] = None
            elif f in _INT_FIELDS:
                row[f] = int(v)
            else:
                row[f] = float(v)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# SVG


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


class _Panel:
    def __init__(self, x, y, w, h, xlo, xhi, title):
        self.x, self.y, self.w, self.h = x, y, w, h
        if xhi <= xlo:
            xlo, xhi = xlo - 0.5, xlo + 0.5
        self.xlo, self.xhi, self.title = xlo, xhi, title
        self.parts: list[str] = []

    def X(self, v):
        return self.x + (v - self.xlo) / (self.xhi - self.xlo) * self.w

    def axes(self):
        p = self.parts
        base = self.y + self.h
        p.append(f'<text x="{self.x}" y="{self.y - 8}" font-size="13">{escape(self.title)}</text>')
        p.append(f'<rect x="{self.x}" y="{self.y}" width="{self.w}" height="{self.h}" '
                 'fill="none" stroke="#333"/>')
        for t in _ticks(self.xlo, self.xhi):
            xx = self.X(t)
            p.append(f'<line x1="{xx:.2f}" y1="{base}" x2="{xx:.2f}" y2="{base + 5}" stroke="#333"/>')
            p.append(f'<text x="{xx:.2f}" y="{base + 18}" font-size="10" '
                     f'text-anchor="middle">{t:.4g}</text>')

    def band(self, lo, hi, colour, opacity=0.25):
        a, b = max(self.X(lo), self.x), min(self.X(hi), self.x + self.w)
        if b > a:
            self.parts.append(f'<rect x="{a:.2f}" y="{self.y}" width="{b - a:.2f}" '
                              f'height="{self.h}" fill="{colour}" fill-opacity="{opacity}"/>')

    def sticks(self, values, colour, top=0.15, bottom=0.85):
        for v in values:
            if self.xlo <= v <= self.xhi:
                xx = self.X(v)
                self.parts.append(f'<line x1="{xx:.2f}" y1="{self.y + top * self.h:.2f}" '
                                  f'x2="{xx:.2f}" y2="{self.y + bottom * self.h:.2f}" '
                                  f'stroke="{colour}" stroke-width="1"/>')

    def dots(self, values, colour, level=0.5):
        for v in values:
            if self.xlo <= v <= self.xhi:
                self.parts.append(f'<circle cx="{self.X(v):.2f}" cy="{self.y + level * self.h:.2f}" '
                                  f'r="3" fill="none" stroke="{colour}"/>')


def spectrum_svg(eigenvalues, clusters=(), window=None, predictions=(), h=None,
                 title="spectrum") -> str:
    """Two panels: clusters over an energy range, and one subcluster window.

    ``clusters`` holds dicts with ``center`` and ``width``; ``window`` is a
    dict with ``k``, ``lo``, ``hi``, ``cluster_lo``, ``cluster_hi`` (or None).
    """
    ev = np.asarray(eigenvalues, dtype=float)
    W, H = 760, 420
    if len(ev):
        lo, hi = float(ev.min()), float(ev.max())
        pad = 0.02 * (hi - lo or 1.0)
        lo, hi = lo - pad, hi + pad
    else:
        lo, hi = 0.0, 1.0
    top = _Panel(50, 40, W - 100, 120, lo, hi, f"{title}: eigenvalues and clusters")
    for c in clusters:
        top.band(c["center"] - c["width"] / 2 - (h or 0) * 0.05,
                 c["center"] + c["width"] / 2 + (h or 0) * 0.05, "#4a90d9")
    top.axes()
    top.sticks(ev, "#000")
    parts = top.parts
    if window is not None:
        bot = _Panel(50, 240, W - 100, 120, window["cluster_lo"], window["cluster_hi"],
                     f"cluster k={window['k']}: subcluster window and predictions")
        bot.band(window["lo"], window["hi"], "#e8a33d", 0.3)
        bot.axes()
        bot.sticks(ev, "#000", 0.3, 0.7)
        bot.dots(predictions, "#c0392b", 0.5)
        parts = parts + bot.parts
    else:
        H = 220
    body = "\n".join(parts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif">\n'
            f'<rect width="{W}" height="{H}" fill="white"/>\n{body}\n</svg>\n')


def emit_reports(artifacts: dict, writer: ArtifactWriter) -> list[str]:
    """Summary document and spectrum charts of a finished run."""
    out = []
    for point in artifacts.get("points", []):
        tag = point["tag"]
        win = point.get("chart_window")
        svg = spectrum_svg(point["eigenvalues"], point.get("clusters", []), win,
                           point.get("chart_predictions", []), point["h"],
                           title=f"h={point['h']:g}")
        out.append(writer.text(f"{tag}/spectrum.svg", svg))
    out.append(writer.json("summary.json", artifacts["summary"]))
    return out
