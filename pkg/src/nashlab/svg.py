"""Minimal standalone SVG line charts.

Hand-rolled (no plotting dependency) so that chart files are byte-stable
across reruns: fixed headers, fixed float formatting, no timestamps.
"""

from __future__ import annotations

import math
import os

__all__ = ["line_chart"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 720, 440
_ML, _MR, _MT, _MB = 64, 16, 36, 44


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(v)
        v += step
    return out


def line_chart(path, series, title="", xlabel="", ylabel="", log_y=False) -> None:
    """Write a line chart; series is a list of (label, xs, ys)."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)]
    if log_y:
        pts = [(x, y) for x, y in pts if y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    xs_all = [p[0] for p in pts]
    ys_all = [math.log10(p[1]) if log_y else p[1] for p in pts]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return _MT + ph - (y - y_lo) / (y_hi - y_lo) * ph

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
    ]
    for tv in _ticks(x_lo, x_hi):
        px = sx(tv)
        lines.append(
            f'<line x1="{_fmt(px)}" y1="{_MT}" x2="{_fmt(px)}" y2="{_MT + ph}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{_fmt(px)}" y="{_MT + ph + 16}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{tv:.6g}</text>'
        )
    for tv in _ticks(y_lo, y_hi):
        py = sy(tv)
        label = f"1e{tv:.3g}" if log_y else f"{tv:.6g}"
        lines.append(
            f'<line x1="{_ML}" y1="{_fmt(py)}" x2="{_ML + pw}" y2="{_fmt(py)}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{_ML - 6}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{label}</text>'
        )
    lines.append(
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#333333"/>'
    )
    for idx, (label, xs, ys) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        coords = []
        for x, y in zip(xs, ys):
            if log_y:
                if y <= 0:
                    continue
                y = math.log10(y)
            coords.append(f"{_fmt(sx(x))},{_fmt(sy(y))}")
        if coords:
            lines.append(
                f'<polyline points="{" ".join(coords)}" fill="none" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
        lines.append(
            f'<text x="{_ML + 8}" y="{_MT + 16 + 14 * idx}" font-family="monospace" '
            f'font-size="12" fill="{color}">{label}</text>'
        )
    if xlabel:
        lines.append(
            f'<text x="{_ML + pw // 2}" y="{_H - 8}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{xlabel}</text>'
        )
    if ylabel:
        lines.append(
            f'<text x="14" y="{_MT + ph // 2}" text-anchor="middle" '
            f'font-family="monospace" font-size="12" '
            f'transform="rotate(-90 14 {_MT + ph // 2})">{ylabel}</text>'
        )
    lines.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
