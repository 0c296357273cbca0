"""Minimal static line charts written directly as SVG."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 60
PALETTE = ("#1f5fa8", "#c0392b", "#7f8c8d", "#27ae60")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def line_chart(title: str, series: list[Series], x_label: str = "t", y_label: str = "", log_y: bool = False) -> str:
    """Polylines over shared axes.  With ``log_y`` nonpositive points are dropped."""
    prepared = []
    for s in series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_y:
            keep &= y > 0
            y = np.where(keep, np.log10(np.where(y > 0, y, 1.0)), 0.0)
        prepared.append((s, x[keep], y[keep]))
    xs = np.concatenate([p[1] for p in prepared]) if prepared else np.array([0.0])
    ys = np.concatenate([p[2] for p in prepared]) if prepared else np.array([0.0])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    if not log_y:
        y_lo = min(y_lo, 0.0)

    def px(v):
        return MARGIN + (v - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def py(v):
        return HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for v in _ticks(x_lo, x_hi):
        out.append(f'<text x="{px(v):.2f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{_fmt(v)}</text>')
    for v in _ticks(y_lo, y_hi):
        label = _fmt(10 ** v) if log_y else _fmt(v)
        out.append(f'<text x="{MARGIN - 6}" y="{py(v) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 14}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(x_label)}</text>')
    if y_label:
        out.append(
            f'<text x="16" y="{HEIGHT / 2}" transform="rotate(-90 16 {HEIGHT / 2})" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{escape(y_label + (" (log10)" if log_y else ""))}</text>'
        )
    for k, (s, x, y) in enumerate(prepared):
        color = PALETTE[k % len(PALETTE)]
        if x.size:
            points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{points}"/>')
        ly = MARGIN + 16 * k
        out.append(f'<line x1="{WIDTH - MARGIN - 150}" y1="{ly}" x2="{WIDTH - MARGIN - 125}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 120}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def wants_log(values) -> bool:
    """Log scale when the positive values span more than three decades."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v) & (v > 0)]
    return v.size > 1 and math.log10(v.max() / v.min()) > 3
