"""Minimal SVG line charts for sweep tables (no plotting dependency)."""
from __future__ import annotations

import math

__all__ = ["line_chart_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_chart_svg(x, series: dict, xlabel: str = "", ylabel: str = "", logx: bool = False,
                   width: int = 560, height: int = 360) -> str:
    """Polyline per series over shared abscissae, with min/max tick labels."""
    xs = [math.log10(v) if logx else float(v) for v in x]
    ys = [float(v) for vals in series.values() for v in vals if v is not None and math.isfinite(v)]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    ml, mr, mt, mb = 70, 20, 20, 50

    def px(v):
        return ml + (v - x0) / (x1 - x0) * (width - ml - mr)

    def py(v):
        return height - mb - (v - y0) / (y1 - y0) * (height - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<path d="M{ml} {mt}V{height - mb}H{width - mr}" stroke="black" fill="none"/>']
    for i, (name, vals) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = [(px(a), py(b)) for a, b in zip(xs, vals) if b is not None and math.isfinite(b)]
        d = " ".join(f"{'M' if j == 0 else 'L'}{a:.2f} {b:.2f}" for j, (a, b) in enumerate(pts))
        out.append(f'<path d="{d}" stroke="{color}" stroke-width="1.5" fill="none"/>')
        out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>' for a, b in pts)
        out.append(f'<text x="{width - mr - 150}" y="{mt + 16 * (i + 1)}" font-size="12" fill="{color}">{name}</text>')
    lab_x = (lambda v: f"{10 ** v:.3g}") if logx else (lambda v: f"{v:.3g}")
    out.append(f'<text x="{ml}" y="{height - mb + 16}" font-size="11">{lab_x(x0)}</text>')
    out.append(f'<text x="{width - mr}" y="{height - mb + 16}" font-size="11" text-anchor="end">{lab_x(x1)}</text>')
    out.append(f'<text x="{ml - 4}" y="{height - mb}" font-size="11" text-anchor="end">{y0:.4g}</text>')
    out.append(f'<text x="{ml - 4}" y="{mt + 10}" font-size="11" text-anchor="end">{y1:.4g}</text>')
    out.append(f'<text x="{(ml + width - mr) / 2}" y="{height - 12}" font-size="12" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="14" y="{(mt + height - mb) / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {(mt + height - mb) / 2})">{ylabel}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
