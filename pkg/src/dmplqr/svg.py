"""Minimal SVG line and heatmap plots written as plain text."""

from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

PALETTE = ("#e67e22", "#2c3e50", "#c0392b", "#2980b9", "#27ae60", "#8e44ad")
W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 50


def _scale(lo, hi, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def _ticks(lo, hi, log, n=5):
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo <= k <= hi]
    return list(np.linspace(lo, hi, n))


class _Axes:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = _scale(*xlim, logx)
        self.y0, self.y1 = _scale(*ylim, logy)

    def px(self, x):
        v = math.log10(x) if self.logx else x
        return ML + (v - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        v = math.log10(y) if self.logy else y
        return H - MB - (v - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def frame(self, title, xlabel, ylabel):
        out = [f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="#333"/>',
               f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
               f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
               f'<text x="16" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {H / 2})">'
               f'{escape(ylabel)}</text>']
        for t in _ticks(self.x0, self.x1, self.logx):
            x = self.px(t)
            out.append(f'<text x="{x:.1f}" y="{H - MB + 16}" text-anchor="middle" font-size="10">{t:.3g}</text>')
        for t in _ticks(self.y0, self.y1, self.logy):
            y = self.py(t)
            out.append(f'<text x="{ML - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{t:.3g}</text>')
        return out


def _finite(xs, ys, logx, logy):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    if logx:
        ok &= xs > 0
    if logy:
        ok &= ys > 0
    return xs[ok], ys[ok]


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False, logy=False, vlines=(), hlines=()):
    """Write an SVG with line/marker series.

    ``series`` is a list of dicts with keys ``x``, ``y``, ``label`` and
    optional ``style`` (``"line"`` or ``"points"``).
    """
    cleaned = [(s, *_finite(s["x"], s["y"], logx, logy)) for s in series]
    xs = np.concatenate([c[1] for c in cleaned] + [np.asarray([v for v, _ in vlines], float)]) \
        if cleaned else np.array([1.0])
    ys = np.concatenate([c[2] for c in cleaned] + [np.asarray([v for v, _ in hlines], float)]) \
        if cleaned else np.array([1.0])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    if logx:
        xs = xs[xs > 0]
    if logy:
        ys = ys[ys > 0]
    if xs.size == 0:
        xs = np.array([1.0])
    if ys.size == 0:
        ys = np.array([1.0])
    ax = _Axes((xs.min(), xs.max()), (ys.min(), ys.max()), logx, logy)
    body = ax.frame(title, xlabel, ylabel)
    for k, (s, x, y) in enumerate(cleaned):
        color = PALETTE[k % len(PALETTE)]
        if s.get("style", "line") == "points":
            body += [f'<circle cx="{ax.px(a):.2f}" cy="{ax.py(b):.2f}" r="3" fill="{color}"/>' for a, b in zip(x, y)]
        elif x.size:
            pts = " ".join(f"{ax.px(a):.2f},{ax.py(b):.2f}" for a, b in zip(x, y))
            body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<text x="{W - MR - 4}" y="{MT + 14 + 14 * k}" text-anchor="end" font-size="11" '
                    f'fill="{color}">{escape(str(s.get("label", "")))}</text>')
    for v, color in vlines:
        if (not logx or v > 0) and math.isfinite(v):
            body.append(f'<line x1="{ax.px(v):.2f}" y1="{MT}" x2="{ax.px(v):.2f}" y2="{H - MB}" stroke="{color}"/>')
    for v, color in hlines:
        if (not logy or v > 0) and math.isfinite(v):
            body.append(f'<line x1="{ML}" y1="{ax.py(v):.2f}" x2="{W - MR}" y2="{ax.py(v):.2f}" '
                        f'stroke="{color}" stroke-dasharray="4 3"/>')
    return _write(path, body)


def heatmap(path, x, y, Z, title="", xlabel="", ylabel="", logx=False):
    """Boolean or real-valued heatmap on a rectilinear ``x`` by ``y`` grid; ``Z`` has shape (len(y), len(x))."""
    x, y, Z = np.asarray(x, float), np.asarray(y, float), np.asarray(Z, float)
    ax = _Axes((x.min(), x.max()), (y.min(), y.max()), logx, False)
    body = ax.frame(title, xlabel, ylabel)
    finite = Z[np.isfinite(Z)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    xe = _edges(x, logx)
    ye = _edges(y, False)
    for i in range(len(y)):
        for j in range(len(x)):
            v = Z[i, j]
            if not np.isfinite(v):
                continue
            g = int(255 - 200 * (v - lo) / span)
            xa, xb = ax.px(xe[j]), ax.px(xe[j + 1])
            ya, yb = ax.py(ye[i + 1]), ax.py(ye[i])
            body.append(f'<rect x="{xa:.2f}" y="{ya:.2f}" width="{max(xb - xa, 0.1):.2f}" '
                        f'height="{max(yb - ya, 0.1):.2f}" fill="rgb({g},{g},255)"/>')
    return _write(path, body)


def _edges(v, log):
    if v.size == 1:
        return np.array([v[0] * 0.9, v[0] * 1.1]) if log else np.array([v[0] - 0.5, v[0] + 0.5])
    w = np.log(v) if log else v
    mid = 0.5 * (w[1:] + w[:-1])
    e = np.concatenate([[w[0] - (mid[0] - w[0])], mid, [w[-1] + (w[-1] - mid[-1])]])
    return np.exp(e) if log else e


def _write(path, body):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif">\n'
                    + "\n".join(body) + "\n</svg>\n")
    return path
