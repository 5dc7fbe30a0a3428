"""SVG line plots of eigenvalue sweeps: lambda against log s with target bands."""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

from ..utils.helpers import format_float


@dataclass
class _Series:
    xs: List[float]
    ys: List[float]
    label: str
    color: str
    dash: Optional[str] = None


@dataclass
class _Band:
    lo: float
    hi: float
    label: str
    color: str


@dataclass
class _Marker:
    x: float
    y: float
    label: str
    color: str


class SvgPlot:
    """Minimal SVG line plot with a log-scaled x axis.

    Series are polylines, bands are horizontal strips (e.g. target +- tol),
    markers are labelled dots. Output is a self-contained SVG string whose
    bytes depend only on the inputs.
    """

    WIDTH = 800
    HEIGHT = 500
    MARGIN = (70, 30, 40, 60)  # left, right, top, bottom
    DEFAULT_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

    def __init__(self, title: str = "", x_label: str = "s", y_label: str = "lambda", log_x: bool = True):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.log_x = log_x
        self.series: List[_Series] = []
        self.bands: List[_Band] = []
        self.markers: List[_Marker] = []

    def _next_color(self) -> str:
        return self.DEFAULT_COLORS[len(self.series) % len(self.DEFAULT_COLORS)]

    def add_series(self, xs: Sequence[float], ys: Sequence[float], label: str = "",
                   color: Optional[str] = None, dash: Optional[str] = None) -> "SvgPlot":
        if len(xs) != len(ys):
            raise ValueError(f"Series '{label}' has {len(xs)} x values and {len(ys)} y values")
        pairs = [(float(x), float(y)) for x, y in zip(xs, ys)
                 if math.isfinite(float(y)) and (not self.log_x or float(x) > 0)]
        self.series.append(_Series([p[0] for p in pairs], [p[1] for p in pairs], label,
                                   color or self._next_color(), dash))
        return self

    def add_band(self, lo: float, hi: float, label: str = "", color: str = "#cccccc") -> "SvgPlot":
        self.bands.append(_Band(float(min(lo, hi)), float(max(lo, hi)), label, color))
        return self

    def add_marker(self, x: float, y: float, label: str = "", color: str = "#000000") -> "SvgPlot":
        self.markers.append(_Marker(float(x), float(y), label, color))
        return self

    # -- geometry -----------------------------------------------------------

    def _tx(self, x: float) -> float:
        return math.log10(x) if self.log_x else x

    def _ranges(self) -> Tuple[float, float, float, float]:
        xs = [self._tx(x) for s in self.series for x in s.xs] + [self._tx(m.x) for m in self.markers]
        ys = [y for s in self.series for y in s.ys] + [m.y for m in self.markers]
        ys += [b.lo for b in self.bands] + [b.hi for b in self.bands]
        if not xs:
            xs = [0.0, 1.0]
        if not ys:
            ys = [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5 * max(1.0, abs(y0))
        return x0, x1, y0 - pad, y1 + pad

    def _mapper(self):
        x0, x1, y0, y1 = self._ranges()
        left, right, top, bottom = self.MARGIN
        w = self.WIDTH - left - right
        h = self.HEIGHT - top - bottom

        def px(x: float) -> float:
            return left + (self._tx(x) - x0) / (x1 - x0) * w

        def py(y: float) -> float:
            return top + (y1 - y) / (y1 - y0) * h

        return px, py, (x0, x1, y0, y1)

    # -- rendering ----------------------------------------------------------

    def render(self) -> str:
        px, py, (x0, x1, y0, y1) = self._mapper()
        left, right, top, bottom = self.MARGIN
        plot_right = self.WIDTH - right
        plot_bottom = self.HEIGHT - bottom
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.WIDTH}" height="{self.HEIGHT}" '
            f'viewBox="0 0 {self.WIDTH} {self.HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{self.WIDTH}" height="{self.HEIGHT}" fill="white"/>',
        ]
        if self.title:
            out.append(f'<text x="{self.WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
                       f'{escape(self.title)}</text>')

        for band in self.bands:
            y_hi, y_lo = py(band.hi), py(band.lo)
            out.append(f'<rect x="{left}" y="{y_hi:.2f}" width="{plot_right - left}" '
                       f'height="{max(y_lo - y_hi, 0.5):.2f}" fill="{band.color}" fill-opacity="0.35"/>')
            if band.label:
                out.append(f'<text x="{plot_right - 4}" y="{y_hi - 3:.2f}" text-anchor="end">{escape(band.label)}</text>')

        out.append(f'<rect x="{left}" y="{top}" width="{plot_right - left}" height="{plot_bottom - top}" '
                   f'fill="none" stroke="black"/>')
        out.extend(self._ticks(px, py, (x0, x1, y0, y1), plot_bottom))

        for series in self.series:
            if not series.xs:
                continue
            points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(series.xs, series.ys))
            dash = f' stroke-dasharray="{series.dash}"' if series.dash else ""
            out.append(f'<polyline points="{points}" fill="none" stroke="{series.color}" stroke-width="1.5"{dash}/>')

        for marker in self.markers:
            cx, cy = px(marker.x), py(marker.y)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="{marker.color}"/>')
            if marker.label:
                out.append(f'<text x="{cx + 6:.2f}" y="{cy - 6:.2f}">{escape(marker.label)}</text>')

        out.extend(self._legend())
        out.append(f'<text x="{(left + plot_right) / 2:.1f}" y="{self.HEIGHT - 15}" text-anchor="middle">'
                   f'{escape(self.x_label)}</text>')
        out.append(f'<text x="15" y="{(top + plot_bottom) / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {(top + plot_bottom) / 2:.1f})">{escape(self.y_label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _ticks(self, px, py, ranges, plot_bottom: float) -> List[str]:
        x0, x1, y0, y1 = ranges
        left = self.MARGIN[0]
        out = []
        if self.log_x:
            for k in range(math.ceil(x0), math.floor(x1) + 1):
                x = px(10.0 ** k)
                out.append(f'<line x1="{x:.2f}" y1="{plot_bottom}" x2="{x:.2f}" y2="{plot_bottom + 5}" stroke="black"/>')
                out.append(f'<text x="{x:.2f}" y="{plot_bottom + 18}" text-anchor="middle">1e{k}</text>')
        else:
            for i in range(6):
                value = x0 + (x1 - x0) * i / 5
                x = px(value)
                out.append(f'<text x="{x:.2f}" y="{plot_bottom + 18}" text-anchor="middle">{value:.3g}</text>')
        for i in range(6):
            value = y0 + (y1 - y0) * i / 5
            y = py(value)
            out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{value:.4g}</text>')
        return out

    def _legend(self) -> List[str]:
        out = []
        x = self.MARGIN[0] + 10
        y = self.MARGIN[2] + 16
        for series in self.series:
            if not series.label:
                continue
            out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{series.color}" stroke-width="2"/>')
            out.append(f'<text x="{x + 26}" y="{y}">{escape(series.label)}</text>')
            y += 16
        return out


def divergence_plot(rows: Sequence[Sequence], lambda_D: float, lambda_N: float,
                    tolerances: Optional[Sequence[float]] = None, title: str = "") -> str:
    """lambda(s) of a divergence table with lambda^D / lambda^N bands and stage markers.

    ``tolerances`` (the largest is used) set the band half-widths; without
    them the bands are drawn as thin lines.
    """
    tol = max(tolerances) if tolerances else 0.0
    plot = SvgPlot(title=title, x_label="s (log scale)", y_label="lambda(s)")
    plot.add_band(lambda_D - tol, lambda_D + tol, f"lambda_D = {format_float(lambda_D)}", "#f4b6b6")
    plot.add_band(lambda_N - tol, lambda_N + tol, f"lambda_N = {format_float(lambda_N)}", "#b6c8f4")
    plot.add_series([row[0] for row in rows], [row[1] for row in rows], "terminal potential")
    for row in rows:
        if len(row) > 3 and row[3] is not None:
            plot.add_marker(row[0], row[1], f"s_{row[3]}")
    return plot.render()
