"""Report serialization: CSV, JSON and static SVG plots.

Everything written here is byte-deterministic for identical input: floats
in CSV use 17 significant digits, JSON keys are sorted, and SVG coordinates
are printed at fixed precision with no timestamps.
"""

from __future__ import annotations

import csv
import io
import json
import math
from html import escape
from pathlib import Path

import numpy as np

__all__ = ["format_value", "write_csv", "write_json", "line_plot_svg", "histogram_svg"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


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


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


class _Axis:
    def __init__(self, values, log, lo_px, hi_px):
        v = np.asarray([x for x in values if (x > 0 if log else math.isfinite(x))], dtype=np.float64)
        if v.size == 0:
            v = np.array([1.0])
        self.log = log
        t = np.log10(v) if log else v
        lo, hi = float(t.min()), float(t.max())
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.04 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad
        self.lo_px, self.hi_px = lo_px, hi_px

    def valid(self, x):
        return x > 0 if self.log else math.isfinite(x)

    def __call__(self, x):
        t = math.log10(x) if self.log else x
        return self.lo_px + (t - self.lo) / (self.hi - self.lo) * (self.hi_px - self.lo_px)

    def ticks(self, n=5):
        out = []
        for i in range(n + 1):
            t = self.lo + (self.hi - self.lo) * i / n
            out.append((10**t if self.log else t))
        return out


def _frame(title, xlabel, ylabel, xa, ya):
    L, T = MARGIN["left"], MARGIN["top"]
    R, B = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>',
    ]
    for x in xa.ticks():
        px = xa(x)
        parts.append(f'<line x1="{px:.2f}" y1="{B}" x2="{px:.2f}" y2="{B + 4}" stroke="black"/>')
        parts.append(f'<text x="{px:.2f}" y="{B + 16}" text-anchor="middle">{x:.3g}</text>')
    for y in ya.ticks():
        py = ya(y)
        parts.append(f'<line x1="{L - 4}" y1="{py:.2f}" x2="{L}" y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{L - 6}" y="{py + 4:.2f}" text-anchor="end">{y:.3g}</text>')
    parts.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {(T + B) / 2:.1f})">{escape(ylabel)}</text>')
    return parts


def _legend(labels):
    x0 = WIDTH - MARGIN["right"] + 12
    out = []
    for i, label in enumerate(labels):
        y = MARGIN["top"] + 14 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<line x1="{x0}" y1="{y}" x2="{x0 + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x0 + 26}" y="{y + 4}">{escape(label)}</text>')
    return out


def _polyline(points, color, dashed=False):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    dash = ' stroke-dasharray="5,3"' if dashed else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'


def line_plot_svg(series, title="", xlabel="", ylabel="", logx=False, logy=False) -> str:
    """One polyline per ``(label, xs, ys)`` series; invalid points on log axes are dropped.

    A series label ending in ``" (oracle)"`` is drawn dashed.
    """
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    xa = _Axis(xs, logx, MARGIN["left"], WIDTH - MARGIN["right"])
    ya = _Axis(ys, logy, HEIGHT - MARGIN["bottom"], MARGIN["top"])
    parts = _frame(title, xlabel, ylabel, xa, ya)
    for i, (label, sx, sy) in enumerate(series):
        pts = [(xa(x), ya(y)) for x, y in zip(sx, sy) if xa.valid(x) and ya.valid(y)]
        if pts:
            parts.append(_polyline(pts, PALETTE[i % len(PALETTE)], label.endswith("(oracle)")))
    parts += _legend([s[0] for s in series])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def histogram_svg(hists, title="", xlabel="", ylabel="count") -> str:
    """Overlay step outlines of ``(label, edges, counts)`` histograms."""
    xs = [e for _, edges, _ in hists for e in edges]
    ys = [0.0] + [float(c) for _, _, counts in hists for c in counts]
    xa = _Axis(xs, False, MARGIN["left"], WIDTH - MARGIN["right"])
    ya = _Axis(ys, False, HEIGHT - MARGIN["bottom"], MARGIN["top"])
    parts = _frame(title, xlabel, ylabel, xa, ya)
    for i, (_, edges, counts) in enumerate(hists):
        pts = [(xa(edges[0]), ya(0.0))]
        for j, c in enumerate(counts):
            pts += [(xa(edges[j]), ya(float(c))), (xa(edges[j + 1]), ya(float(c)))]
        pts.append((xa(edges[-1]), ya(0.0)))
        parts.append(_polyline(pts, PALETTE[i % len(PALETTE)]))
    parts += _legend([h[0] for h in hists])
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
