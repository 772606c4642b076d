"""Deterministic SVG 1.1 charts: line overlay, annotated heatmap, scatter.

Output is plain text with fixed float formatting so identical inputs produce
byte-identical documents (golden-testable).
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

CANVAS_W = 960
CANVAS_H = 600
MARGIN = {"left": 70, "right": 180, "top": 50, "bottom": 50}
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
          "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"]
N_TICKS = 5


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _header(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{CANVAS_W}" height="{CANVAS_H}" '
        f'viewBox="0 0 {CANVAS_W} {CANVAS_H}">',
        f'<g><title>{_esc(title)}</title>',
        f'<rect x="0" y="0" width="{CANVAS_W}" height="{CANVAS_H}" fill="#ffffff"/>',
        f'<text x="{CANVAS_W // 2}" y="30" text-anchor="middle" '
        f'font-family="sans-serif" font-size="18">{_esc(title)}</text>',
    ]


def _footer() -> list[str]:
    return ["</g>", "</svg>", ""]


def _plot_rect():
    x0, y0 = MARGIN["left"], MARGIN["top"]
    x1, y1 = CANVAS_W - MARGIN["right"], CANVAS_H - MARGIN["bottom"]
    return x0, y0, x1, y1


def _span(lo: float, hi: float):
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _axes(lines, x0, y0, x1, y1, xmin, xmax, ymin, ymax):
    lines.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
                 f'fill="none" stroke="#000000"/>')
    for k in range(N_TICKS):
        t = k / (N_TICKS - 1)
        xv = xmin + t * (xmax - xmin)
        px = x0 + t * (x1 - x0)
        lines.append(f'<line x1="{_fmt(px)}" y1="{y1}" x2="{_fmt(px)}" '
                     f'y2="{y1 + 5}" stroke="#000000"/>')
        lines.append(f'<text x="{_fmt(px)}" y="{y1 + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{xv:.4g}</text>')
        yv = ymin + t * (ymax - ymin)
        py = y1 - t * (y1 - y0)
        lines.append(f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" '
                     f'y2="{_fmt(py)}" stroke="#000000"/>')
        lines.append(f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{yv:.4g}</text>')


def _legend(lines, names):
    lx = CANVAS_W - MARGIN["right"] + 20
    for i, name in enumerate(names):
        color = COLORS[i % len(COLORS)]
        ly = MARGIN["top"] + 10 + 22 * i
        lines.append(f'<rect x="{lx}" y="{ly}" width="14" height="14" '
                     f'fill="{color}"/>')
        lines.append(f'<text x="{lx + 20}" y="{ly + 12}" '
                     f'font-family="sans-serif" font-size="12">{_esc(name)}</text>')


def render_line_chart(series, title: str = "profiles") -> str:
    """series: ordered (name, ys) or (name, xs, ys) tuples, one polyline each."""
    if not series:
        raise DataError("no series to plot")
    norm = []
    for item in series:
        if len(item) == 2:
            name, ys = item
            xs = list(range(len(ys)))
        else:
            name, xs, ys = item
        if len(xs) == 0 or len(xs) != len(ys):
            raise DataError(f"series {name!r} is empty or mismatched")
        norm.append((name, np.asarray(xs, float), np.asarray(ys, float)))
    xmin, xmax = _span(min(s[1].min() for s in norm), max(s[1].max() for s in norm))
    ymin, ymax = _span(min(s[2].min() for s in norm), max(s[2].max() for s in norm))
    x0, y0, x1, y1 = _plot_rect()
    lines = _header(title)
    _axes(lines, x0, y0, x1, y1, xmin, xmax, ymin, ymax)
    for i, (name, xs, ys) in enumerate(norm):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(
            f"{_fmt(x0 + (x - xmin) / (xmax - xmin) * (x1 - x0))},"
            f"{_fmt(y1 - (y - ymin) / (ymax - ymin) * (y1 - y0))}"
            for x, y in zip(xs, ys))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
    _legend(lines, [s[0] for s in norm])
    lines.extend(_footer())
    return "\n".join(lines)


def _heat_color(t: float) -> str:
    # white-to-dark-blue ramp; t=1 darkest
    lo = (247, 251, 255)
    hi = (8, 48, 107)
    r, g, b = (round(a + (b_ - a) * t) for a, b_ in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_heatmap(names, matrix, title: str = "similarity") -> str:
    """n x n heatmap with numeric annotations; largest value is darkest."""
    M = np.asarray(matrix, dtype=np.float64)
    n = len(names)
    if n == 0 or M.shape != (n, n):
        raise DataError("heatmap needs a nonempty square matrix with names")
    x0, y0, x1, y1 = _plot_rect()
    cell_w = (x1 - x0) / n
    cell_h = (y1 - y0) / n
    vmax = M.max()
    vmin = M.min()
    spread = vmax - vmin if vmax > vmin else 1.0
    lines = _header(title)
    for i in range(n):
        for j in range(n):
            t = (M[i, j] - vmin) / spread
            cx = x0 + j * cell_w
            cy = y0 + i * cell_h
            lines.append(f'<rect x="{_fmt(cx)}" y="{_fmt(cy)}" '
                         f'width="{_fmt(cell_w)}" height="{_fmt(cell_h)}" '
                         f'fill="{_heat_color(t)}" stroke="#cccccc"/>')
            text_color = "#ffffff" if t > 0.6 else "#000000"
            lines.append(f'<text x="{_fmt(cx + cell_w / 2)}" '
                         f'y="{_fmt(cy + cell_h / 2 + 4)}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11" '
                         f'fill="{text_color}">{M[i, j]:.4g}</text>')
    for i, name in enumerate(names):
        lines.append(f'<text x="{_fmt(x0 - 8)}" y="{_fmt(y0 + (i + 0.5) * cell_h + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_esc(name)}</text>')
        lines.append(f'<text x="{_fmt(x0 + (i + 0.5) * cell_w)}" y="{_fmt(y1 + 16)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_esc(name)}</text>')
    lines.extend(_footer())
    return "\n".join(lines)


def render_scatter(points, title: str = "embedding") -> str:
    """points: ordered (x, y, dataset) tuples; one color per dataset name."""
    if not points:
        raise DataError("no points to plot")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    tags = [p[2] for p in points]
    order = list(dict.fromkeys(tags))  # first-appearance order
    xmin, xmax = _span(xs.min(), xs.max())
    ymin, ymax = _span(ys.min(), ys.max())
    x0, y0, x1, y1 = _plot_rect()
    lines = _header(title)
    _axes(lines, x0, y0, x1, y1, xmin, xmax, ymin, ymax)
    for x, y, tag in zip(xs, ys, tags):
        color = COLORS[order.index(tag) % len(COLORS)]
        px = x0 + (x - xmin) / (xmax - xmin) * (x1 - x0)
        py = y1 - (y - ymin) / (ymax - ymin) * (y1 - y0)
        lines.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" '
                     f'fill="{color}" fill-opacity="0.7"/>')
    _legend(lines, order)
    lines.extend(_footer())
    return "\n".join(lines)
