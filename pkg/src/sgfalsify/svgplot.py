"""Direct SVG emission for 2D projections of runs: no plotting dependency.

Shades the dual-game frames and alternating frames, draws the domain,
initial and unsafe boxes, the falsifying trajectory, and the observation
sequence, projected onto a chosen coordinate pair.
"""

from __future__ import annotations

import os
from typing import Optional, Sequence

import numpy as np

from .geometry import (EMPTY, HPolytope, Zonotope, vertices_2d,
                       zonotope_vertices_2d, project)


def _project_set(S, coords):
    """2D polygon vertices of a set projected onto the coordinate pair."""
    i, j = coords
    if isinstance(S, Zonotope):
        M = np.zeros((2, S.dim))
        M[0, i] = 1.0
        M[1, j] = 1.0
        return zonotope_vertices_2d(Zonotope(M @ S.G, M @ S.c))
    P: HPolytope = S
    if P.dim == 2 and coords == (0, 1):
        return vertices_2d(P)
    if P.dim > 6:
        return None  # projection too costly; skip the shape
    Q = project(P, [i, j], dim_cap=max(12, P.dim))
    if Q is EMPTY:
        return None
    return vertices_2d(Q)


class SvgCanvas:
    def __init__(self, xlim, ylim, width=640, height=640, pad=24):
        self.xlim, self.ylim = xlim, ylim
        self.w, self.h, self.pad = width, height, pad
        self.parts = []

    def _tx(self, p):
        x = (p[0] - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        y = (p[1] - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return (self.pad + x * (self.w - 2 * self.pad),
                self.h - self.pad - y * (self.h - 2 * self.pad))

    def polygon(self, pts, fill, stroke="none", opacity=1.0, stroke_width=1.0):
        if pts is None or len(pts) == 0:
            return
        coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in map(self._tx, pts))
        self.parts.append(
            f'<polygon points="{coords}" fill="{fill}" stroke="{stroke}" '
            f'fill-opacity="{opacity}" stroke-width="{stroke_width}"/>')

    def polyline(self, pts, stroke, width=1.5, dashed=False):
        if len(pts) == 0:
            return
        coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in map(self._tx, pts))
        dash = ' stroke-dasharray="4 3"' if dashed else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"{dash}/>')

    def circle(self, p, r, fill):
        px, py = self._tx(p)
        self.parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r}" fill="{fill}"/>')

    def to_svg(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" '
                f'height="{self.h}" viewBox="0 0 {self.w} {self.h}">\n'
                f'<rect width="{self.w}" height="{self.h}" fill="white"/>\n'
                f"{body}\n</svg>\n")


def render_run(problem, dual_frames: Sequence, alt_frames: Sequence,
               scenario, path: str, coords: tuple = (0, 1)) -> None:
    i, j = coords
    dom = problem.domain_box
    xlim = (dom[i, 0] - 0.05 * (dom[i, 1] - dom[i, 0]),
            dom[i, 1] + 0.05 * (dom[i, 1] - dom[i, 0]))
    ylim = (dom[j, 0] - 0.05 * (dom[j, 1] - dom[j, 0]),
            dom[j, 1] + 0.05 * (dom[j, 1] - dom[j, 0]))
    cv = SvgCanvas(xlim, ylim)
    cv.polygon([(dom[i, 0], dom[j, 0]), (dom[i, 1], dom[j, 0]),
                (dom[i, 1], dom[j, 1]), (dom[i, 0], dom[j, 1])],
               fill="none", stroke="#888888")
    if problem.X_init_box is not None:
        bi = problem.X_init_box
        cv.polygon([(bi[i, 0], bi[j, 0]), (bi[i, 1], bi[j, 0]),
                    (bi[i, 1], bi[j, 1]), (bi[i, 0], bi[j, 1])],
                   fill="#3cb371", opacity=0.35)
    for box in problem.unsafe_boxes:
        if box is None:
            continue
        cv.polygon([(box[i, 0], box[j, 0]), (box[i, 1], box[j, 0]),
                    (box[i, 1], box[j, 1]), (box[i, 0], box[j, 1])],
                   fill="#d62728", opacity=0.5)
    for S in dual_frames:
        cv.polygon(_project_set(S, coords), fill="#9467bd", opacity=0.18)
    for fr in alt_frames:
        S = fr.X if hasattr(fr, "X") else fr
        cv.polygon(_project_set(S, coords), fill="#555555", opacity=0.25)
    if scenario is not None:
        cv.polyline([(x[i], x[j]) for x in scenario.x_traj], stroke="black", width=2.0)
        if scenario.T:
            cv.polyline([(y[i], y[j]) for y in scenario.y_traj],
                        stroke="#1f77b4", width=1.2, dashed=True)
        cv.circle((scenario.x_traj[0][i], scenario.x_traj[0][j]), 4, "#2ca02c")
        cv.circle((scenario.x_traj[-1][i], scenario.x_traj[-1][j]), 4, "#d62728")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cv.to_svg())
