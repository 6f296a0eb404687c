"""Static SVG scatter rendering for the decision-moment report.

No plotting dependency: the figures are for inspection, so a small
hand-rolled SVG writer is enough.
"""

from __future__ import annotations

PANEL_W, PANEL_H = 520, 150
MARGIN_L, MARGIN_B, MARGIN_T = 60, 34, 24
COLORS = {"stop": "#d62728", "go": "#2ca02c"}


def _scale(value, lo, hi, out_lo, out_hi):
    if hi <= lo:
        return (out_lo + out_hi) / 2
    return out_lo + (value - lo) / (hi - lo) * (out_hi - out_lo)


def render_timing_svg(rows: list[dict], path) -> None:
    """One panel per driver: refined time-to-line (x) vs elapsed yellow at
    the decision moment (y), colored by the latched decision."""
    drivers = sorted({r["driver_id"] for r in rows})
    xs = [r["refined_time_to_line_s"] for r in rows]
    ys = [r["latency_s"] for r in rows]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    pad_x = 0.05 * (x_hi - x_lo or 1.0)
    pad_y = 0.1 * (y_hi - y_lo or 1.0)
    x_lo, x_hi = x_lo - pad_x, x_hi + pad_x
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    height = MARGIN_T + len(drivers) * (PANEL_H + MARGIN_B)
    width = MARGIN_L + PANEL_W + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">']
    parts.append(f'<text x="{MARGIN_L}" y="14" font-size="13">decision moments: '
                 'refined time to stop-line vs elapsed yellow</text>')
    for i, driver in enumerate(drivers):
        top = MARGIN_T + i * (PANEL_H + MARGIN_B)
        bottom = top + PANEL_H
        parts.append(f'<rect x="{MARGIN_L}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" '
                     'fill="none" stroke="#888"/>')
        parts.append(f'<text x="{MARGIN_L + 6}" y="{top + 14}">{driver}</text>')
        for frac in (0.0, 0.5, 1.0):
            xv = x_lo + frac * (x_hi - x_lo)
            px = _scale(xv, x_lo, x_hi, MARGIN_L, MARGIN_L + PANEL_W)
            parts.append(f'<text x="{px:.1f}" y="{bottom + 14}" text-anchor="middle">'
                         f'{xv:.1f}s</text>')
            yv = y_lo + frac * (y_hi - y_lo)
            py = _scale(yv, y_lo, y_hi, bottom, top)
            parts.append(f'<text x="{MARGIN_L - 6}" y="{py + 4:.1f}" text-anchor="end">'
                         f'{yv:.1f}</text>')
        for r in rows:
            if r["driver_id"] != driver:
                continue
            px = _scale(r["refined_time_to_line_s"], x_lo, x_hi, MARGIN_L, MARGIN_L + PANEL_W)
            py = _scale(r["latency_s"], y_lo, y_hi, bottom, top)
            parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" '
                         f'fill="{COLORS.get(r["decision"], "#333")}" fill-opacity="0.6"/>')
    legend_y = 14
    parts.append(f'<circle cx="{width - 110}" cy="{legend_y - 4}" r="4" fill="{COLORS["stop"]}"/>')
    parts.append(f'<text x="{width - 100}" y="{legend_y}">stop</text>')
    parts.append(f'<circle cx="{width - 60}" cy="{legend_y - 4}" r="4" fill="{COLORS["go"]}"/>')
    parts.append(f'<text x="{width - 50}" y="{legend_y}">go</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
