"""Self-contained SVG scatter and line plots, no renderer dependency.

Output is deterministic text (fixed float formatting), so identical data
produces byte-identical files.
"""
from __future__ import annotations

import math

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 60, 20, 40, 50


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _bounds(values, pad_frac: float = 0.05) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = pad_frac * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.xlim, self.ylim = xlim, ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">',
            f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" font-size="16" '
            f'font-family="sans-serif">{_esc(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return _ML + (x - lo) / (hi - lo) * (_W - _ML - _MR)

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return _H - _MB - (y - lo) / (hi - lo) * (_H - _MT - _MB)

    def _axes(self, xlabel, ylabel):
        x0, x1 = _ML, _W - _MR
        y0, y1 = _H - _MB, _MT
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            f'fill="none" stroke="black" stroke-width="1"/>'
        )
        for t in _nice_ticks(*self.xlim):
            if not self.xlim[0] <= t <= self.xlim[1]:
                continue
            p = self.px(t)
            self.parts.append(f'<line x1="{p:.2f}" y1="{y0}" x2="{p:.2f}" y2="{y0 + 5}" stroke="black"/>')
            self.parts.append(
                f'<text x="{p:.2f}" y="{y0 + 18}" text-anchor="middle" font-size="11" '
                f'font-family="sans-serif">{_fmt(t)}</text>'
            )
        for t in _nice_ticks(*self.ylim):
            if not self.ylim[0] <= t <= self.ylim[1]:
                continue
            p = self.py(t)
            self.parts.append(f'<line x1="{x0 - 5}" y1="{p:.2f}" x2="{x0}" y2="{p:.2f}" stroke="black"/>')
            self.parts.append(
                f'<text x="{x0 - 8}" y="{p + 4:.2f}" text-anchor="end" font-size="11" '
                f'font-family="sans-serif">{_fmt(t)}</text>'
            )
        self.parts.append(
            f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" text-anchor="middle" '
            f'font-size="13" font-family="sans-serif">{_esc(xlabel)}</text>'
        )
        self.parts.append(
            f'<text x="16" y="{(_MT + _H - _MB) / 2:.1f}" text-anchor="middle" font-size="13" '
            f'font-family="sans-serif" transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.1f})">'
            f"{_esc(ylabel)}</text>"
        )

    def legend(self, labels_colors):
        x = _ML + 10
        y = _MT + 14
        for label, color in labels_colors:
            self.parts.append(f'<circle cx="{x}" cy="{y - 4}" r="4" fill="{color}"/>')
            self.parts.append(
                f'<text x="{x + 10}" y="{y}" font-size="12" font-family="sans-serif">{_esc(label)}</text>'
            )
            y += 18

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.4g}"


def scatter_svg(series, title: str = "", xlabel: str = "x", ylabel: str = "y") -> str:
    """series: iterable of (label, (n, 2) points); one color per series."""
    series = [(label, np.atleast_2d(np.asarray(pts, dtype=np.float64))) for label, pts in series]
    all_pts = np.concatenate([p for _, p in series if len(p)], axis=0)
    canvas = _Canvas(_bounds(all_pts[:, 0]), _bounds(all_pts[:, 1]), title, xlabel, ylabel)
    for idx, (label, pts) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        for p in pts:
            canvas.parts.append(
                f'<circle cx="{canvas.px(p[0]):.2f}" cy="{canvas.py(p[1]):.2f}" r="2.5" '
                f'fill="{color}" fill-opacity="0.7"/>'
            )
    canvas.legend([(label, PALETTE[i % len(PALETTE)]) for i, (label, _) in enumerate(series)])
    return canvas.finish()


def line_svg(series, title: str = "", xlabel: str = "step", ylabel: str = "value") -> str:
    """series: iterable of (label, xs, ys); one polyline per series."""
    prepared = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        keep = np.isfinite(ys)
        prepared.append((label, xs[keep], ys[keep]))
    all_x = np.concatenate([x for _, x, _ in prepared])
    all_y = np.concatenate([y for _, _, y in prepared])
    canvas = _Canvas(_bounds(all_x), _bounds(all_y), title, xlabel, ylabel)
    for idx, (label, xs, ys) in enumerate(prepared):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{canvas.px(x):.2f},{canvas.py(y):.2f}" for x, y in zip(xs, ys))
        canvas.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    canvas.legend([(label, PALETTE[i % len(PALETTE)]) for i, (label, _, _) in enumerate(prepared)])
    return canvas.finish()
