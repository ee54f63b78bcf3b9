"""Saliency-driven region proposal.

Pipeline: binarize the saliency map at a threshold, group the surviving
patches into connected components (two patches connect when their
Chebyshev grid distance is at most ``r``, traversed breadth-first), and
map each component's minimum bounding rectangle to pixel coordinates:

    x1 = x_min * patch_w            y1 = y_min * patch_h
    x2 = min((x_max + 1) * patch_w, img_w)
    y2 = min((y_max + 1) * patch_h, img_h)

where x indexes columns and y indexes rows.  The clamp keeps trailing
overhang patches inside the image.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyComponent
from .types import BBox, HyperParams, Mask, PatchGrid, QueryEmbedding, SaliencyMap
from .similarity import saliency_map

__all__ = [
    "Component",
    "RegionResult",
    "binarize",
    "chebyshev",
    "find_components",
    "min_bbox",
    "propose_regions",
]


@dataclass(frozen=True)
class Component:
    """A maximal set of salient patches mutually connected within radius r."""

    patch_coords: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "patch_coords", frozenset(self.patch_coords))

    def __len__(self) -> int:
        return len(self.patch_coords)


@dataclass(frozen=True)
class RegionResult:
    """One proposed region: pixel box plus its component and score summary."""

    bbox: BBox
    component: Component
    peak_score: float
    mean_score: float


def binarize(s: SaliencyMap, eta: float) -> Mask:
    """Mask with bit k set exactly when ``scores[k] >= eta`` (inclusive)."""
    return Mask(rows=s.rows, cols=s.cols, bits=s.scores >= eta)


def chebyshev(p1: tuple[int, int], p2: tuple[int, int]) -> int:
    """Chessboard distance ``max(|dx|, |dy|)`` between two grid coordinates."""
    return max(abs(p1[0] - p2[0]), abs(p1[1] - p2[1]))


def find_components(mask: Mask, r: int) -> list[Component]:
    """Partition the salient coordinates into Chebyshev-r connected components.

    BFS from each unvisited salient patch in row-major scan order; a
    neighbor is any salient patch within the (2r+1)^2 Chebyshev ball minus
    the center.  Components come out in first-visit order, so the result
    is deterministic.
    """
    if r < 1:
        raise ValueError(f"neighbor radius must be >= 1, got {r}")
    rows, cols = mask.rows, mask.cols
    bits = mask.bits
    salient = mask.salient_coords()
    salient_set = set(salient)
    visited: set[tuple[int, int]] = set()
    components: list[Component] = []
    for start in salient:
        if start in visited:
            continue
        queue: deque[tuple[int, int]] = deque([start])
        visited.add(start)
        current: list[tuple[int, int]] = []
        while queue:
            cr, cc = queue.popleft()
            current.append((cr, cc))
            for nr in range(max(0, cr - r), min(rows, cr + r + 1)):
                for nc in range(max(0, cc - r), min(cols, cc + r + 1)):
                    if (nr, nc) == (cr, cc):
                        continue
                    coord = (nr, nc)
                    if coord in salient_set and coord not in visited:
                        visited.add(coord)
                        queue.append(coord)
        components.append(Component(frozenset(current)))
    return components


def min_bbox(component: Component, grid: PatchGrid) -> BBox:
    """Minimum pixel bounding rectangle of a component on its grid."""
    coords = component.patch_coords
    if not coords:
        raise EmptyComponent("cannot bound an empty component")
    rs = [c[0] for c in coords]
    cs = [c[1] for c in coords]
    y_min, y_max = min(rs), max(rs)
    x_min, x_max = min(cs), max(cs)
    if not (0 <= y_min and y_max < grid.rows and 0 <= x_min and x_max < grid.cols):
        raise EmptyComponent(
            f"component coordinates outside {grid.rows}x{grid.cols} grid")
    return BBox(
        x1=x_min * grid.patch_w,
        y1=y_min * grid.patch_h,
        x2=min((x_max + 1) * grid.patch_w, grid.img_w),
        y2=min((y_max + 1) * grid.patch_h, grid.img_h),
    )


def propose_regions(q: QueryEmbedding, grid: PatchGrid, hp: HyperParams) -> list[RegionResult]:
    """Full proposal pipeline for one (query, document) pair.

    Regions are ranked by peak saliency descending; ties keep the
    component discovery order, so identical inputs give identical output.
    """
    eta = hp.require_eta()
    smap = saliency_map(q, grid)
    mask = binarize(smap, eta)
    comps = find_components(mask, hp.radius)
    results = []
    for comp in comps:
        vals = np.array([smap.score_at(r_, c_) for (r_, c_) in sorted(comp.patch_coords)])
        results.append(RegionResult(
            bbox=min_bbox(comp, grid),
            component=comp,
            peak_score=float(vals.max()),
            mean_score=float(vals.mean()),
        ))
    order = sorted(range(len(results)), key=lambda i: (-results[i].peak_score, i))
    return [results[i] for i in order]
