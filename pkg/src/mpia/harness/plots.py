"""Static SVG plots: per-party objective scatter and top-down UAV path maps.

Output is plain text built from fixed-precision numbers, so identical input
gives byte-identical files.
"""

from __future__ import annotations

from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import PartyScheme
from ..problems.uav import UavScenario

PANEL = 220
MARGIN = 44
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _n(x: float) -> str:
    return f"{x:.2f}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _panel_pairs(m: int) -> list[tuple[int, int]]:
    if m == 1:
        return [(0, 0)]
    return list(combinations(range(m), 2))


def front_svg(F, scheme: PartyScheme, names: Sequence[str] | None = None, title: str = "") -> str:
    """One row of panels per party; a party with more than two objectives gets one panel per pair."""
    F = np.asarray(F, dtype=float).reshape(-1, scheme.total_objectives)
    names = list(names) if names is not None else [f"f{i + 1}" for i in range(scheme.total_objectives)]
    rows = [_panel_pairs(len(p)) for p in scheme.parties]
    ncol = max(len(r) for r in rows)
    width = ncol * (PANEL + MARGIN) + MARGIN
    height = len(rows) * (PANEL + MARGIN) + MARGIN + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="13">{_esc(title)}</text>',
    ]
    for k, pairs in enumerate(rows):
        cols = scheme.parties[k]
        for c, (a, b) in enumerate(pairs):
            x0 = MARGIN + c * (PANEL + MARGIN)
            y0 = MARGIN + 20 + k * (PANEL + MARGIN)
            ia, ib = cols[a], cols[b]
            out.append(f'<g class="panel" data-party="{k + 1}">')
            out.append(
                f'<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#444"/>'
            )
            out.append(
                f'<text x="{x0 + PANEL / 2:.0f}" y="{y0 + PANEL + 28}" font-family="sans-serif" '
                f'font-size="11" text-anchor="middle">{_esc(names[ia])}</text>'
            )
            ylabel = names[ib] if a != b else "party " + str(k + 1)
            out.append(
                f'<text x="{x0 - 30}" y="{y0 + PANEL / 2:.0f}" font-family="sans-serif" font-size="11" '
                f'text-anchor="middle" transform="rotate(-90 {x0 - 30} {y0 + PANEL / 2:.0f})">'
                f"{_esc(ylabel)}</text>"
            )
            if len(F):
                xs = F[:, ia]
                ys = F[:, ib] if a != b else np.zeros(len(F))
                sx = _scale(xs, x0 + 8, x0 + PANEL - 8)
                sy = _scale(ys, y0 + PANEL - 8, y0 + 8)
                _ticks(out, xs, ys if a != b else None, x0, y0)
                color = PALETTE[k % len(PALETTE)]
                for px, py in zip(sx, sy):
                    out.append(f'<circle cx="{_n(px)}" cy="{_n(py)}" r="3" fill="{color}" fill-opacity="0.8"/>')
            out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _scale(v, lo, hi) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    vmin, vmax = v.min(), v.max()
    if vmax <= vmin:
        return np.full(len(v), (lo + hi) / 2)
    return lo + (v - vmin) / (vmax - vmin) * (hi - lo)


def _ticks(out: list[str], xs, ys, x0, y0) -> None:
    style = 'font-family="sans-serif" font-size="9" fill="#555"'
    out.append(f'<text x="{x0}" y="{y0 + PANEL + 12}" {style}>{xs.min():.4g}</text>')
    out.append(f'<text x="{x0 + PANEL}" y="{y0 + PANEL + 12}" text-anchor="end" {style}>{xs.max():.4g}</text>')
    if ys is not None:
        out.append(f'<text x="{x0 - 4}" y="{y0 + PANEL}" text-anchor="end" {style}>{ys.min():.4g}</text>')
        out.append(f'<text x="{x0 - 4}" y="{y0 + 9}" text-anchor="end" {style}>{ys.max():.4g}</text>')


def emit_front_plot(F, scheme: PartyScheme, path, names=None, title: str = "") -> Path:
    path = Path(path)
    path.write_text(front_svg(F, scheme, names, title), encoding="utf-8")
    return path


def path_svg(paths: Sequence[np.ndarray], scenario: UavScenario, cell_px: int = 10, title: str = "") -> str:
    """Top-down map: population shading, buildings, hover points and path polylines.

    ``paths`` are waypoint arrays in metres.  The map's y axis points up.
    """
    W, H = scenario.width, scenario.height
    pad = 20
    width, height = W * cell_px + 2 * pad, H * cell_px + 2 * pad + 16

    def sx(gx):
        return pad + gx * cell_px

    def sy(gy):
        return pad + 16 + (H - gy) * cell_px

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="14" font-family="sans-serif" font-size="12">{_esc(title)}</text>',
        '<g class="density">',
    ]
    pop = scenario.pop_density
    top = pop.max()
    if top > 0:
        for iy, ix in zip(*np.nonzero(pop > 0.02 * top)):
            op = pop[iy, ix] / top * 0.6
            out.append(
                f'<rect x="{sx(ix)}" y="{sy(iy + 1)}" width="{cell_px}" height="{cell_px}" '
                f'fill="#e6550d" fill-opacity="{op:.3f}"/>'
            )
    out.append("</g>")
    out.append('<g class="buildings">')
    bh = scenario.building_height
    hmax = bh.max()
    for iy, ix in zip(*np.nonzero(bh > 0)):
        op = 0.25 + 0.65 * bh[iy, ix] / hmax
        out.append(
            f'<rect x="{sx(ix)}" y="{sy(iy + 1)}" width="{cell_px}" height="{cell_px}" '
            f'fill="#3c3c3c" fill-opacity="{op:.3f}"/>'
        )
    out.append("</g>")
    out.append(
        f'<rect x="{pad}" y="{pad + 16}" width="{W * cell_px}" height="{H * cell_px}" fill="none" stroke="#222"/>'
    )
    out.append('<g class="paths" fill="none" stroke-width="1.5">')
    for j, P in enumerate(paths):
        P = np.asarray(P, dtype=float) / np.array([scenario.cell_size, scenario.cell_size, 1.0])
        pts = " ".join(f"{_n(sx(x))},{_n(sy(y))}" for x, y in P[:, :2])
        out.append(f'<polyline points="{pts}" stroke="{PALETTE[j % len(PALETTE)]}" stroke-opacity="0.8"/>')
    out.append("</g>")
    out.append('<g class="hover-points">')
    for hx, hy in scenario.hover_points:
        out.append(
            f'<circle cx="{_n(sx(hx))}" cy="{_n(sy(hy))}" r="5" fill="#ffd700" stroke="black" '
            f'data-x="{hx:g}" data-y="{hy:g}"/>'
        )
    out.append("</g>")
    for label, (gx, gy) in (("S", scenario.start), ("E", scenario.end)):
        out.append(
            f'<text x="{_n(sx(gx) + 4)}" y="{_n(sy(gy) - 4)}" font-family="sans-serif" font-size="11">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_path_plot(paths, scenario: UavScenario, path, title: str = "") -> Path:
    path = Path(path)
    path.write_text(path_svg(paths, scenario, title=title), encoding="utf-8")
    return path
