"""Hand-rolled SVG output: density heatmaps and classification sketches.

No plotting dependency; triangles of the grid are filled directly with a
small perceptual color ramp, on a linear or logarithmic scale.
"""

from __future__ import annotations

import math

import numpy as np

from .operators import GridDensity

_RAMP = [
    (0.267, 0.005, 0.329), (0.283, 0.141, 0.458), (0.254, 0.265, 0.530),
    (0.207, 0.372, 0.553), (0.164, 0.471, 0.558), (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518), (0.267, 0.749, 0.441), (0.478, 0.821, 0.318),
    (0.741, 0.873, 0.150), (0.993, 0.906, 0.144),
]


def _color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    pos = u * (len(_RAMP) - 1)
    k = min(int(pos), len(_RAMP) - 2)
    f = pos - k
    rgb = [(1 - f) * a + f * b for a, b in zip(_RAMP[k], _RAMP[k + 1])]
    return "#" + "".join(f"{int(round(255 * c)):02x}" for c in rgb)


_W, _H, _PAD = 640, 600, 40


def _sx(x: float) -> float:
    return _PAD + x * (_W - 2 * _PAD)


def _sy(y: float) -> float:
    return _H - _PAD - y * (_H - 2 * _PAD)


def density_svg(density: GridDensity, scale: str = "linear") -> str:
    """Heatmap of a grid density; scale is "linear" or "log"."""
    if scale not in ("linear", "log"):
        raise ValueError(f"unknown scale {scale!r}")
    values = density.density_values()
    if scale == "log":
        floor = max(values[values > 0].min(initial=1.0) * 1e-3, 1e-300)
        values = np.log10(np.maximum(values, floor))
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    grid = density.grid
    if grid.dim == 2:
        tris = grid.cell_triangles()
        for cid in range(grid.n_cells):
            pts = " ".join(f"{_sx(x):.2f},{_sy(y):.2f}" for x, y in tris[cid])
            parts.append(
                f'<polygon points="{pts}" fill="{_color((values[cid] - lo) / span)}" '
                f'stroke="none"/>')
        outline = f"{_sx(0):.2f},{_sy(0):.2f} {_sx(1):.2f},{_sy(0):.2f} {_sx(0):.2f},{_sy(1):.2f}"
        parts.append(f'<polygon points="{outline}" fill="none" stroke="black" stroke-width="1"/>')
    else:
        m = grid.resolution
        vmax = values.max()
        base = _sy(0.0)
        top_span = _H - 2 * _PAD
        for k in range(m):
            u = (values[k] - lo) / span
            height = top_span * (values[k] / vmax if vmax > 0 else 0.0)
            x0 = _sx(k / m)
            x1 = _sx((k + 1) / m)
            parts.append(
                f'<rect x="{x0:.2f}" y="{base - height:.2f}" width="{x1 - x0:.2f}" '
                f'height="{height:.2f}" fill="{_color(u)}" stroke="none"/>')
        parts.append(f'<line x1="{_sx(0):.2f}" y1="{base:.2f}" x2="{_sx(1):.2f}" '
                     f'y2="{base:.2f}" stroke="black" stroke-width="1"/>')
    parts.append(f'<text x="{_PAD}" y="{_PAD / 2 + 6}" font-size="14" '
                 f'font-family="monospace">cell density ({scale} scale)</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def save_density_svg(density: GridDensity, path, scale: str = "linear") -> None:
    with open(path, "w") as fh:
        fh.write(density_svg(density, scale=scale))
        fh.write("\n")


def classification_svg(classification) -> str:
    """Sketch of the classified member sets over the simplex."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    if classification.dim == 1:
        y = _sy(0.5)
        parts.append(f'<line x1="{_sx(0):.2f}" y1="{y:.2f}" x2="{_sx(1):.2f}" y2="{y:.2f}" '
                     'stroke="#bbbbbb" stroke-width="2"/>')
        for member in classification.members:
            if member.kind == "vertex":
                parts.append(f'<circle cx="{_sx(float(member.vertex)):.2f}" cy="{y:.2f}" '
                             'r="8" fill="#d62728"/>')
            else:
                parts.append(f'<line x1="{_sx(0):.2f}" y1="{y:.2f}" x2="{_sx(1):.2f}" '
                             f'y2="{y:.2f}" stroke="#d62728" stroke-width="6"/>')
    else:
        outline = f"{_sx(0):.2f},{_sy(0):.2f} {_sx(1):.2f},{_sy(0):.2f} {_sx(0):.2f},{_sy(1):.2f}"
        parts.append(f'<polygon points="{outline}" fill="none" stroke="black" stroke-width="1.5"/>')
        verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        for member in classification.members:
            if member.kind == "region":
                for ring in member.region.rings():
                    pts = " ".join(f"{_sx(x):.2f},{_sy(y):.2f}" for x, y in ring)
                    parts.append(f'<polygon points="{pts}" fill="#1f77b4" '
                                 'fill-opacity="0.35" stroke="#1f77b4" stroke-width="1"/>')
            elif member.kind == "edge":
                a, b = (verts[k] for k in member.edge)
                parts.append(f'<line x1="{_sx(a[0]):.2f}" y1="{_sy(a[1]):.2f}" '
                             f'x2="{_sx(b[0]):.2f}" y2="{_sy(b[1]):.2f}" '
                             'stroke="#d62728" stroke-width="6"/>')
            else:
                x, y = verts[member.vertex]
                parts.append(f'<circle cx="{_sx(x):.2f}" cy="{_sy(y):.2f}" r="8" '
                             'fill="#d62728"/>')
        label = classification.class_name.value
        parts.append(f'<text x="{_PAD}" y="{_PAD / 2 + 6}" font-size="14" '
                     f'font-family="monospace">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def save_classification_svg(classification, path) -> None:
    with open(path, "w") as fh:
        fh.write(classification_svg(classification))
        fh.write("\n")
