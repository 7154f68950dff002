"""Minimal deterministic SVG renderers for quick inspection of results.

Not publication plotting: fixed size, fixed palette, no dependencies, and
byte-stable output for identical inputs.
"""

from __future__ import annotations

import math

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 20, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _finite(values) -> list[float]:
    return [v for v in values if math.isfinite(v)]


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def line_chart(x, series: dict[str, list[float]], path: str, *,
               x_label: str = "", y_label: str = "",
               hline: float | None = None) -> None:
    """Write a multi-curve line chart; NaN points break the polyline."""
    xs = list(x)
    all_y = _finite([v for ys in series.values() for v in ys])
    if not xs or not all_y:
        raise ValueError("nothing to plot")
    sx = _scale(min(xs), max(xs), _ML, _W - _MR)
    sy = _scale(min(all_y + ([hline] if hline is not None else [])),
                max(all_y + ([hline] if hline is not None else [])),
                _H - _MB, _MT)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
             f'height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
             f'y2="{_H - _MB}" stroke="black"/>',
             f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
             f'stroke="black"/>']
    for t in (min(xs), 0.5 * (min(xs) + max(xs)), max(xs)):
        parts.append(f'<text x="{_fmt(sx(t))}" y="{_H - _MB + 18}" '
                     f'font-size="11" text-anchor="middle">{_fmt(t)}</text>')
    for t in (min(all_y), 0.5 * (min(all_y) + max(all_y)), max(all_y)):
        parts.append(f'<text x="{_ML - 6}" y="{_fmt(sy(t) + 4)}" '
                     f'font-size="11" text-anchor="end">{_fmt(t)}</text>')
    if x_label:
        parts.append(f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 12}" '
                     f'font-size="12" text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{(_MT + _H - _MB) // 2}" '
                     f'font-size="12" text-anchor="middle" transform='
                     f'"rotate(-90 16 {(_MT + _H - _MB) // 2})">{y_label}</text>')
    if hline is not None:
        y = _fmt(sy(hline))
        parts.append(f'<line x1="{_ML}" y1="{y}" x2="{_W - _MR}" y2="{y}" '
                     f'stroke="#888888" stroke-dasharray="5,4"/>')
    for k, (name, ys) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        chunk: list[str] = []
        chunks: list[list[str]] = []
        for xv, yv in zip(xs, ys):
            if math.isfinite(yv):
                chunk.append(f"{_fmt(sx(xv))},{_fmt(sy(yv))}")
            elif chunk:
                chunks.append(chunk)
                chunk = []
        if chunk:
            chunks.append(chunk)
        for c in chunks:
            parts.append(f'<polyline fill="none" stroke="{color}" '
                         f'stroke-width="1.5" points="{" ".join(c)}"/>')
        parts.append(f'<text x="{_W - _MR - 6}" y="{_MT + 16 + 16 * k}" '
                     f'font-size="12" text-anchor="end" fill="{color}">'
                     f'{name}</text>')
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts))


def heatmap(x, y, values, path: str, *, x_label: str = "",
            y_label: str = "", contour: tuple[tuple[float, float], ...] = (),
            ) -> None:
    """Write a rect-per-cell heatmap with an optional contour overlay.

    ``values[i][j]`` corresponds to ``(y[i], x[j])``; the color ramp runs
    blue (low) to red (high) around white at 1/2.
    """
    xs, ys = list(x), list(y)
    flat = _finite([v for row in values for v in row])
    if not flat:
        raise ValueError("nothing to plot")
    lo, hi = min(flat), max(flat)
    sx = _scale(min(xs), max(xs), _ML, _W - _MR)
    sy = _scale(min(ys), max(ys), _H - _MB, _MT)
    cw = (_W - _ML - _MR) / max(len(xs), 1)
    ch = (_H - _MT - _MB) / max(len(ys), 1)

    def color(v: float) -> str:
        if not math.isfinite(v):
            return "#cccccc"
        t = (v - lo) / (hi - lo) if hi > lo else 0.5
        rch = int(255 * t)
        bch = int(255 * (1.0 - t))
        gch = int(255 * (1.0 - abs(2.0 * t - 1.0)))
        return f"#{rch:02x}{gch:02x}{bch:02x}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
             f'height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            parts.append(
                f'<rect x="{_fmt(sx(xv) - cw / 2)}" y="{_fmt(sy(yv) - ch / 2)}"'
                f' width="{_fmt(cw + 0.5)}" height="{_fmt(ch + 0.5)}" '
                f'fill="{color(values[i][j])}"/>')
    if contour:
        pts = " ".join(f"{_fmt(sx(rv))},{_fmt(sy(gv))}" for rv, gv in contour)
        parts.append(f'<polyline fill="none" stroke="black" '
                     f'stroke-width="1.5" points="{pts}"/>')
    for t in (min(xs), max(xs)):
        parts.append(f'<text x="{_fmt(sx(t))}" y="{_H - _MB + 18}" '
                     f'font-size="11" text-anchor="middle">{_fmt(t)}</text>')
    for t in (min(ys), max(ys)):
        parts.append(f'<text x="{_ML - 6}" y="{_fmt(sy(t) + 4)}" '
                     f'font-size="11" text-anchor="end">{_fmt(t)}</text>')
    if x_label:
        parts.append(f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 12}" '
                     f'font-size="12" text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{(_MT + _H - _MB) // 2}" '
                     f'font-size="12" text-anchor="middle" transform='
                     f'"rotate(-90 16 {(_MT + _H - _MB) // 2})">{y_label}</text>')
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts))
