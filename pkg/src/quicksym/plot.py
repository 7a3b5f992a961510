"""Minimal deterministic SVG line charts.

Output depends only on the input numbers: coordinates are printed with a
fixed number of decimals and no timestamps or ids are embedded, so equal
inputs give byte-identical files.  Axes are ``<line>`` elements; each data
series and each horizontal reference line is exactly one ``<path>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union
from xml.sax.saxutils import escape

__all__ = ["Series", "Reference", "render_svg", "emit_plot"]

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


@dataclass(frozen=True)
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]

    def __post_init__(self) -> None:
        if len(self.xs) != len(self.ys):
            raise ValueError(f"series {self.label!r}: {len(self.xs)} x values but {len(self.ys)} y values")


@dataclass(frozen=True)
class Reference:
    """Horizontal line at ``y``."""

    label: str
    y: float


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _tick(v: float) -> str:
    return f"{v:.4g}"


def _range(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def render_svg(
    series: Sequence[Series],
    references: Sequence[Reference] = (),
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    pts = [(float(x), float(y)) for s in series for x, y in zip(s.xs, s.ys)]
    for x, y in pts:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("plot values must be finite")
    x0, x1 = _range([x for x, _ in pts])
    y0, y1 = _range([y for _, y in pts] + [float(r.y) for r in references])
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x: float) -> str:
        return _fmt(LEFT + (x - x0) / (x1 - x0) * pw)

    def sy(y: float) -> str:
        return _fmt(TOP + (y1 - y) / (y1 - y0) * ph)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    base_y = TOP + ph
    out.append(f'<line x1="{LEFT}" y1="{base_y}" x2="{LEFT + pw}" y2="{base_y}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base_y}" stroke="black"/>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv)}" y="{base_y + 16}" text-anchor="middle" font-size="10">{_tick(xv)}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{sy(yv)}" text-anchor="end" font-size="10">{_tick(yv)}</text>')
    if xlabel:
        out.append(f'<text x="{LEFT + pw // 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{TOP + ph // 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {TOP + ph // 2})">{escape(ylabel)}</text>'
        )
    legend_y = TOP + 12
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        order = sorted(zip(s.xs, s.ys))
        if order:
            d = " ".join(f"{'M' if k == 0 else 'L'}{sx(x)},{sy(y)}" for k, (x, y) in enumerate(order))
            out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{LEFT + pw - 4}" y="{legend_y}" text-anchor="end" font-size="11" fill="{color}">{escape(s.label)}</text>')
        legend_y += 14
    for r in references:
        ry = sy(float(r.y))
        out.append(f'<path d="M{LEFT},{ry} L{LEFT + pw},{ry}" fill="none" stroke="gray" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{LEFT + 4}" y="{_fmt(float(ry) - 4)}" font-size="11" fill="gray">{escape(r.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(
    series: Sequence[Series],
    path: Union[str, Path],
    references: Sequence[Reference] = (),
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> Path:
    """Write the chart to ``path``; raises ``OSError`` if it cannot be written."""
    path = Path(path)
    path.write_text(render_svg(series, references, title, xlabel, ylabel))
    return path
