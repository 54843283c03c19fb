"""Minimal deterministic SVG charts.

Every coordinate and color is formatted with fixed precision, so the same
data always produces byte-identical files (suitable for golden-file
diffs).  Only the chart styles the command-line tool needs are provided:
line charts (spectra, anti-crossing branches) and heatmaps (detuning vs
energy intensity maps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
FONT = "Helvetica, Arial, sans-serif"

# five anchor colors, dark violet to yellow, interpolated linearly
_HEAT_STOPS = (
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
)


def _fmt(x: float) -> str:
    """Fixed two-decimal pixel coordinates keep the output stable."""
    return f"{x:.2f}"


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """1-2-5 tick positions covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("tick range must be finite")
    if hi <= lo:
        hi = lo + (abs(lo) if lo else 1.0)
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if span / step <= target - 1 + 1e-9:
            break
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def _tick_label(value: float) -> str:
    if value == 0.0:
        return "0"
    if abs(value) >= 1e5 or abs(value) < 1e-3:
        return f"{value:.2e}"
    text = f"{value:.6g}"
    return text


def heat_color(u: float) -> str:
    """Map u in [0, 1] onto the fixed color ramp."""
    u = min(max(u, 0.0), 1.0)
    pos = u * (len(_HEAT_STOPS) - 1)
    i = min(int(pos), len(_HEAT_STOPS) - 2)
    frac = pos - i
    r0, g0, b0 = _HEAT_STOPS[i]
    r1, g1, b1 = _HEAT_STOPS[i + 1]
    r = round(r0 + (r1 - r0) * frac)
    g = round(g0 + (g1 - g0) * frac)
    b = round(b0 + (b1 - b0) * frac)
    return f"#{r:02x}{g:02x}{b:02x}"


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    color: str = ""

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError("series x and y must be equal-length 1-D arrays")
        if self.x.size < 2:
            raise ValueError("series needs at least two points")


@dataclass
class Frame:
    """Shared plot scaffolding: margins, axes, ticks, labels."""

    width: int = 640
    height: int = 420
    margin_left: int = 72
    margin_right: int = 24
    margin_top: int = 40
    margin_bottom: int = 56
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    parts: list[str] = field(default_factory=list)

    @property
    def plot_w(self) -> float:
        return self.width - self.margin_left - self.margin_right

    @property
    def plot_h(self) -> float:
        return self.height - self.margin_top - self.margin_bottom

    def x_pix(self, x: float, lo: float, hi: float) -> float:
        return self.margin_left + (x - lo) / (hi - lo) * self.plot_w

    def y_pix(self, y: float, lo: float, hi: float) -> float:
        return self.margin_top + (hi - y) / (hi - lo) * self.plot_h

    def open_svg(self) -> None:
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        )
        self.parts.append(f'<rect width="{self.width}" height="{self.height}" fill="white"/>')
        if self.title:
            self.parts.append(
                f'<text x="{self.width // 2}" y="24" font-family="{FONT}" font-size="15" '
                f'text-anchor="middle">{escape(self.title)}</text>'
            )

    def draw_axes(self, x_range: tuple[float, float], y_range: tuple[float, float]) -> None:
        x0, x1 = x_range
        y0, y1 = y_range
        left, top = self.margin_left, self.margin_top
        right = left + self.plot_w
        bottom = top + self.plot_h
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{_fmt(self.plot_w)}" '
            f'height="{_fmt(self.plot_h)}" fill="none" stroke="black" stroke-width="1"/>'
        )
        for t in nice_ticks(x0, x1):
            if not x0 <= t <= x1:
                continue
            px = self.x_pix(t, x0, x1)
            self.parts.append(
                f'<line x1="{_fmt(px)}" y1="{bottom}" x2="{_fmt(px)}" y2="{bottom + 5}" '
                f'stroke="black" stroke-width="1"/>'
            )
            self.parts.append(
                f'<text x="{_fmt(px)}" y="{bottom + 18}" font-family="{FONT}" font-size="11" '
                f'text-anchor="middle">{_tick_label(t)}</text>'
            )
        for t in nice_ticks(y0, y1):
            if not y0 <= t <= y1:
                continue
            py = self.y_pix(t, y0, y1)
            self.parts.append(
                f'<line x1="{left - 5}" y1="{_fmt(py)}" x2="{left}" y2="{_fmt(py)}" '
                f'stroke="black" stroke-width="1"/>'
            )
            self.parts.append(
                f'<text x="{left - 8}" y="{_fmt(py + 4)}" font-family="{FONT}" font-size="11" '
                f'text-anchor="end">{_tick_label(t)}</text>'
            )
        if self.xlabel:
            self.parts.append(
                f'<text x="{_fmt(left + self.plot_w / 2)}" y="{self.height - 12}" '
                f'font-family="{FONT}" font-size="13" text-anchor="middle">'
                f"{escape(self.xlabel)}</text>"
            )
        if self.ylabel:
            cx, cy = 18, top + self.plot_h / 2
            self.parts.append(
                f'<text x="{cx}" y="{_fmt(cy)}" font-family="{FONT}" font-size="13" '
                f'text-anchor="middle" transform="rotate(-90 {cx} {_fmt(cy)})">'
                f"{escape(self.ylabel)}</text>"
            )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _ranges(series: Sequence[Series]) -> tuple[tuple[float, float], tuple[float, float]]:
    xs = np.concatenate([s.x for s in series])
    ys = np.concatenate([s.y for s in series])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("plot data must be finite")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    return (x0, x1), (y0 - pad, y1 + pad)


def line_chart(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Polyline chart with legend; series colors cycle a fixed palette."""
    if not series:
        raise ValueError("need at least one series")
    frame = Frame(width=width, height=height, title=title, xlabel=xlabel, ylabel=ylabel)
    x_range, y_range = _ranges(series)
    frame.open_svg()
    frame.draw_axes(x_range, y_range)
    for idx, s in enumerate(series):
        color = s.color or PALETTE[idx % len(PALETTE)]
        points = " ".join(
            f"{_fmt(frame.x_pix(x, *x_range))},{_fmt(frame.y_pix(y, *y_range))}"
            for x, y in zip(s.x, s.y)
        )
        frame.parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
    # legend in the top-right corner of the plot area
    lx = frame.margin_left + frame.plot_w - 150
    ly = frame.margin_top + 10
    for idx, s in enumerate(series):
        if not s.label:
            continue
        color = s.color or PALETTE[idx % len(PALETTE)]
        y = ly + 16 * idx
        frame.parts.append(
            f'<line x1="{lx}" y1="{y}" x2="{lx + 22}" y2="{y}" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        frame.parts.append(
            f'<text x="{lx + 28}" y="{y + 4}" font-family="{FONT}" font-size="11">'
            f"{escape(s.label)}</text>"
        )
    return frame.render()


def heatmap(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 460,
) -> str:
    """Cell grid colored by z[j, i] (rows follow y, columns follow x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape != (y.size, x.size):
        raise ValueError(f"z must have shape (len(y), len(x)), got {z.shape}")
    if x.size < 2 or y.size < 2:
        raise ValueError("heatmap needs at least a 2x2 grid")
    if not np.all(np.isfinite(z)):
        raise ValueError("plot data must be finite")
    frame = Frame(width=width, height=height, title=title, xlabel=xlabel,
                  ylabel=ylabel, margin_right=86)
    x_range = (float(x.min()), float(x.max()))
    y_range = (float(y.min()), float(y.max()))
    z0, z1 = float(z.min()), float(z.max())
    scale = (z1 - z0) or 1.0
    frame.open_svg()
    cw = frame.plot_w / (x.size - 1)
    ch = frame.plot_h / (y.size - 1)
    for j in range(y.size):
        for i in range(x.size):
            color = heat_color((z[j, i] - z0) / scale)
            px = frame.x_pix(float(x[i]), *x_range) - cw / 2
            py = frame.y_pix(float(y[j]), *y_range) - ch / 2
            frame.parts.append(
                f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(cw + 0.5)}" '
                f'height="{_fmt(ch + 0.5)}" fill="{color}"/>'
            )
    frame.draw_axes(x_range, y_range)
    # colorbar
    bar_x = frame.margin_left + frame.plot_w + 18
    bar_h = frame.plot_h
    n_seg = 32
    for seg in range(n_seg):
        u0 = seg / n_seg
        py = frame.margin_top + (1.0 - (seg + 1) / n_seg) * bar_h
        frame.parts.append(
            f'<rect x="{bar_x}" y="{_fmt(py)}" width="14" height="{_fmt(bar_h / n_seg + 0.5)}" '
            f'fill="{heat_color(u0 + 0.5 / n_seg)}"/>'
        )
    for u, value in ((0.0, z0), (1.0, z1)):
        py = frame.margin_top + (1.0 - u) * bar_h
        frame.parts.append(
            f'<text x="{bar_x + 18}" y="{_fmt(py + 4)}" font-family="{FONT}" '
            f'font-size="10">{_tick_label(value)}</text>'
        )
    return frame.render()


def save_svg(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(text)
    return path
