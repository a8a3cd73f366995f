"""Minimal SVG bar and line charts for report tables."""

from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Sequence

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=130, top=40, bottom=50)
COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"]


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{(MARGIN["left"] + WIDTH - MARGIN["right"]) / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi):
        self.xlo, self.xhi = xlo, (xhi if xhi > xlo else xlo + 1)
        self.ylo, self.yhi = ylo, (yhi if yhi > ylo else ylo + 1)
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def px(self, x):
        return self.x0 + (x - self.xlo) / (self.xhi - self.xlo) * (self.x1 - self.x0)

    def py(self, y):
        return self.y0 + (y - self.ylo) / (self.yhi - self.ylo) * (self.y1 - self.y0)

    def draw(self, ticks_x=None) -> list[str]:
        out = [f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x1}" y2="{self.y0}" stroke="black"/>',
               f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x0}" y2="{self.y1}" stroke="black"/>']
        for i in range(6):
            v = self.ylo + i * (self.yhi - self.ylo) / 5
            y = self.py(v)
            out.append(f'<line x1="{self.x0 - 4}" y1="{y:.1f}" x2="{self.x0}" y2="{y:.1f}" stroke="black"/>')
            out.append(f'<text x="{self.x0 - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
        if ticks_x is None:
            ticks_x = [self.xlo + i * (self.xhi - self.xlo) / 5 for i in range(6)]
        for v in ticks_x:
            x = self.px(v)
            out.append(f'<text x="{x:.1f}" y="{self.y0 + 16}" text-anchor="middle">{v:.3g}</text>')
        return out


def bar_chart(labels: Sequence, values: Sequence[float], title: str = "", xlabel: str = "", ylabel: str = "",
              ylim: tuple[float, float] | None = None) -> str:
    if len(labels) != len(values) or not values:
        raise ValueError("need matching, nonempty labels and values")
    lo, hi = ylim or (min(0.0, min(values)), max(values))
    ax = _Axes(0, len(values), lo, hi)
    out = _frame(title, xlabel, ylabel) + ax.draw(ticks_x=[])
    w = (ax.x1 - ax.x0) / len(values)
    for i, (lab, v) in enumerate(zip(labels, values)):
        x = ax.x0 + i * w + 0.15 * w
        top, base = ax.py(v), ax.py(max(lo, 0.0))
        out.append(f'<rect x="{x:.1f}" y="{min(top, base):.1f}" width="{0.7 * w:.1f}" height="{abs(base - top):.1f}" fill="{COLOURS[0]}"/>')
        out.append(f'<text x="{x + 0.35 * w:.1f}" y="{ax.y0 + 16}" text-anchor="middle">{escape(str(lab))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
               ylim: tuple[float, float] | None = None) -> str:
    """``series`` maps a legend label to ``(xs, ys)``."""
    if not series:
        raise ValueError("no series to plot")
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1]]
    lo, hi = ylim or (min(ys), max(ys))
    ax = _Axes(min(xs), max(xs), lo, hi)
    out = _frame(title, xlabel, ylabel) + ax.draw()
    for i, (name, (sx, sy)) in enumerate(series.items()):
        c = COLOURS[i % len(COLOURS)]
        pts = " ".join(f"{ax.px(x):.1f},{ax.py(y):.1f}" for x, y in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
        ly = MARGIN["top"] + 16 * i + 10
        out.append(f'<line x1="{ax.x1 + 10}" y1="{ly}" x2="{ax.x1 + 30}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{ax.x1 + 34}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg: str) -> Path:
    path = Path(path)
    path.write_text(svg)
    return path
