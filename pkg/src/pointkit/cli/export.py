"""CSV and static SVG output for the infectivity matrix and the exogenous rates."""
from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

LOW = (247, 251, 255)
HIGH = (8, 48, 107)


def write_matrix_csv(path, matrix, names) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target\\source", *names])
        for name, row in zip(names, matrix):
            w.writerow([name, *(repr(float(v)) for v in row)])


def write_vector_csv(path, values, names, header="mu") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_type", header])
        for name, v in zip(names, values):
            w.writerow([name, repr(float(v))])


def _color(frac: float) -> str:
    rgb = [round(lo + (hi - lo) * frac) for lo, hi in zip(LOW, HIGH)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _scale(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    return lo, hi, (lambda v: 0.0 if span == 0 else (float(v) - lo) / span)


def heatmap_svg(matrix, names, title="Infectivity") -> str:
    """Cell colour is linear in the value; the legend shows min and max.

    A constant matrix renders in a single colour.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    C = matrix.shape[0]
    cell, left, top = 40, 110, 50
    width = left + C * cell + 140
    height = top + C * cell + 110
    lo, hi, frac = _scale(matrix) if matrix.size else (0.0, 0.0, lambda v: 0.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="20" font-size="14">{escape(title)}</text>',
    ]
    for i in range(C):
        y = top + i * cell
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4}" text-anchor="end">{escape(str(names[i]))}</text>')
        for j in range(C):
            x = left + j * cell
            v = matrix[i, j]
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_color(frac(v))}">'
                       f'<title>{escape(str(names[i]))} &lt;- {escape(str(names[j]))}: {v:.6g}</title></rect>')
    for j in range(C):
        x = left + j * cell + cell / 2
        y = top + C * cell + 12
        out.append(f'<text x="{x}" y="{y}" text-anchor="end" transform="rotate(-45 {x} {y})">'
                   f'{escape(str(names[j]))}</text>')
    lx = left + C * cell + 30
    out.append('<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">'
               f'<stop offset="0" stop-color="{_color(0.0)}"/><stop offset="1" stop-color="{_color(1.0)}"/>'
               '</linearGradient></defs>')
    out.append(f'<rect x="{lx}" y="{top}" width="16" height="{C * cell}" fill="url(#scale)" stroke="#888"/>')
    out.append(f'<text x="{lx + 22}" y="{top + 10}">max {hi:.4g}</text>')
    out.append(f'<text x="{lx + 22}" y="{top + C * cell}">min {lo:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart_svg(values, names, title="Exogenous intensity") -> str:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    bar, gap, left, top, plot_h = 28, 12, 60, 40, 200
    width = left + n * (bar + gap) + 40
    height = top + plot_h + 90
    lo = min(0.0, float(values.min()) if n else 0.0)
    hi = max(0.0, float(values.max()) if n else 0.0)
    span = hi - lo or 1.0

    def ypos(v):
        return top + plot_h * (hi - v) / span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="20" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{ypos(0)}" x2="{width - 30}" y2="{ypos(0)}" stroke="#333"/>',
        f'<text x="{left - 6}" y="{top + 4}" text-anchor="end">{hi:.4g}</text>',
        f'<text x="{left - 6}" y="{top + plot_h + 4}" text-anchor="end">{lo:.4g}</text>',
    ]
    for i, v in enumerate(values):
        x = left + gap / 2 + i * (bar + gap)
        y0, y1 = sorted((ypos(0), ypos(v)))
        out.append(f'<rect x="{x}" y="{y0}" width="{bar}" height="{y1 - y0}" fill="{_color(0.7)}">'
                   f'<title>{escape(str(names[i]))}: {v:.6g}</title></rect>')
        lx, ly = x + bar / 2, top + plot_h + 14
        out.append(f'<text x="{lx}" y="{ly}" text-anchor="end" transform="rotate(-45 {lx} {ly})">'
                   f'{escape(str(names[i]))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_causality(model, names, prefix):
    """Write ``<prefix>.csv`` and ``<prefix>.svg``; returns the two paths."""
    matrix = model.infectivity_matrix()
    prefix = Path(prefix)
    csv_path, svg_path = prefix.with_name(prefix.name + ".csv"), prefix.with_name(prefix.name + ".svg")
    write_matrix_csv(csv_path, matrix, names)
    svg_path.write_text(heatmap_svg(matrix, names))
    return csv_path, svg_path


def export_exogenous(model, names, prefix, seq_index=-1, seq_feature=None):
    """Exogenous rates of one sequence (default: the average sequence) as CSV + bar chart."""
    feats = None if seq_feature is None else np.asarray(seq_feature, dtype=np.float64)[None, :]
    mu = model.exogenous_values(np.array([seq_index]), feats)[0]
    prefix = Path(prefix)
    csv_path, svg_path = prefix.with_name(prefix.name + ".csv"), prefix.with_name(prefix.name + ".svg")
    write_vector_csv(csv_path, mu, names)
    svg_path.write_text(bar_chart_svg(mu, names))
    return csv_path, svg_path
