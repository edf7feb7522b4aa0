"""Volume estimators.

The column integrators are the measurement core: volume as the sum of
(ground element area x column height) over a calibrated cloud.  The
uniform variant assigns every point an equal ground footprint derived
from the known scene area; the grid variant rasterizes the footprint into
square cells so memory follows the ground area rather than the 3D extent.
Slice-stacking and convex-hull estimators are included as comparison
baselines with their known pathologies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .cloud import PointCloud
from .errors import DegenerateCloud, DegenerateInput, InvalidParameter

METHOD_COLUMN_UNIFORM = "COLUMN_UNIFORM"
METHOD_COLUMN_GRID = "COLUMN_GRID"
METHOD_SLICE = "SLICE"
METHOD_HULL3D = "HULL3D"

AGG_MAX = "MAX"
AGG_MEAN = "MEAN"


@dataclass(frozen=True)
class CompensationFactor:
    """Multiplicative correction for volume trimmed by the near-ground margin."""

    factor: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.factor < 2.0:
            raise InvalidParameter(
                f"compensation factor {self.factor} outside sanity bound (0.5, 2.0)"
            )


@dataclass(frozen=True)
class GridSpec:
    """Square XY cells; origin defaults to the cloud's min corner."""

    cell_size: float = 0.025
    aggregator: str = AGG_MEAN
    origin: tuple[float, float] | None = None

    def __post_init__(self):
        if self.cell_size <= 0:
            raise InvalidParameter(f"cell_size must be > 0, got {self.cell_size}")
        if self.aggregator not in (AGG_MAX, AGG_MEAN):
            raise InvalidParameter(f"aggregator must be MAX or MEAN, got {self.aggregator!r}")


@dataclass(frozen=True)
class VolumeEstimate:
    volume: float
    method: str
    params_used: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def footprint_area(scene_area: float, point_count: int) -> float:
    """Ground element area per point under the uniform-sampling assumption."""
    if scene_area <= 0:
        raise InvalidParameter(f"scene_area must be > 0, got {scene_area}")
    if point_count <= 0:
        raise InvalidParameter(f"point_count must be > 0, got {point_count}")
    return scene_area / point_count


def column_volume_uniform(cloud: PointCloud, element_area: float,
                          comp: CompensationFactor = CompensationFactor(),
                          signed: bool = True) -> VolumeEstimate:
    """Sum of element_area x z over all points.

    Signed mode keeps below-ground contributions negative, matching the
    single-pass integration that skips a positivity test; unsigned mode
    clamps each height at zero first.
    """
    if element_area <= 0:
        raise InvalidParameter(f"element_area must be > 0, got {element_area}")
    z = cloud.xyz[:, 2] if len(cloud) else np.zeros(0)
    heights = z if signed else np.maximum(z, 0.0)
    volume = comp.factor * element_area * float(heights.sum())
    return VolumeEstimate(
        volume=volume,
        method=METHOD_COLUMN_UNIFORM,
        params_used={"element_area": element_area, "signed": signed,
                     "compensation": comp.factor},
        diagnostics={"point_count": len(cloud)},
    )


def column_volume_grid(cloud: PointCloud, grid: GridSpec = GridSpec(),
                       comp: CompensationFactor = CompensationFactor()) -> VolumeEstimate:
    """Rasterized column integration over occupied ground cells.

    Each nonempty cell contributes cell_area x height, with the height the
    MAX or MEAN of its member z values, clamped at zero so the estimate is
    never negative.  Memory scales with the number of occupied cells.
    """
    if len(cloud) == 0:
        return VolumeEstimate(
            volume=0.0, method=METHOD_COLUMN_GRID,
            params_used={"cell_size": grid.cell_size, "aggregator": grid.aggregator,
                         "compensation": comp.factor},
            diagnostics={"point_count": 0, "cell_count": 0},
        )
    xyz = cloud.xyz
    origin = np.asarray(grid.origin if grid.origin is not None
                        else xyz[:, :2].min(axis=0), dtype=np.float64)
    cells = np.floor((xyz[:, :2] - origin) / grid.cell_size).astype(np.int64)
    _, inverse = np.unique(cells, axis=0, return_inverse=True)
    n_cells = int(inverse.max()) + 1
    z = xyz[:, 2]
    if grid.aggregator == AGG_MAX:
        heights = np.full(n_cells, -np.inf)
        np.maximum.at(heights, inverse, z)
    else:
        sums = np.zeros(n_cells)
        np.add.at(sums, inverse, z)
        counts = np.bincount(inverse, minlength=n_cells)
        heights = sums / counts
    heights = np.maximum(heights, 0.0)
    cell_area = grid.cell_size ** 2
    volume = comp.factor * cell_area * float(heights.sum())
    return VolumeEstimate(
        volume=volume,
        method=METHOD_COLUMN_GRID,
        params_used={"cell_size": grid.cell_size, "aggregator": grid.aggregator,
                     "compensation": comp.factor},
        diagnostics={"point_count": len(cloud), "cell_count": n_cells},
    )


def slice_volume(cloud: PointCloud, interval: float) -> VolumeEstimate:
    """Stacked-slab baseline: per z-layer 2D hull area x layer thickness.

    Layers start at z = 0; layers with fewer than 3 points (or collinear
    points) contribute nothing, which is the known low-interval failure of
    the method, while large intervals overestimate by integrating each
    layer's full footprint over its whole thickness.
    """
    if interval <= 0:
        raise InvalidParameter(f"interval must be > 0, got {interval}")
    xyz = cloud.xyz
    total = 0.0
    n_layers = 0
    if len(cloud):
        above = xyz[xyz[:, 2] >= 0.0]
        if len(above):
            layer_idx = np.floor(above[:, 2] / interval).astype(np.int64)
            order = np.argsort(layer_idx, kind="stable")
            sorted_idx = layer_idx[order]
            boundaries = np.flatnonzero(np.diff(sorted_idx)) + 1
            for block in np.split(order, boundaries):
                pts = above[block][:, :2]
                if len(pts) < 3:
                    continue
                try:
                    _, area = convex_hull_2d(pts)
                except DegenerateInput:
                    continue
                total += area * interval
                n_layers += 1
    return VolumeEstimate(
        volume=total,
        method=METHOD_SLICE,
        params_used={"interval": interval},
        diagnostics={"point_count": len(cloud), "slice_count": n_layers},
    )


def hull3d_volume(cloud: PointCloud) -> VolumeEstimate:
    """Exact convex hull volume, summed as tetrahedra against an interior point.

    The hull facets come from Qhull; the volume is accumulated per facet as
    the tetrahedron spanned with the hull vertex centroid, which is interior
    by convexity.
    """
    if len(cloud) < 4:
        raise DegenerateCloud(f"3D hull needs >= 4 points, got {len(cloud)}")
    try:
        hull = ConvexHull(cloud.xyz)
    except QhullError as exc:
        raise DegenerateCloud(f"degenerate cloud for 3D hull: {exc}") from exc
    pts = cloud.xyz
    interior = pts[hull.vertices].mean(axis=0)
    simplices = pts[hull.simplices] - interior
    volume = float(np.abs(np.linalg.det(simplices)).sum() / 6.0)
    return VolumeEstimate(
        volume=volume,
        method=METHOD_HULL3D,
        params_used={},
        diagnostics={"point_count": len(cloud),
                     "hull_vertex_count": int(len(hull.vertices))},
    )


def convex_hull_2d(points: Sequence | np.ndarray) -> tuple[np.ndarray, float]:
    """Counter-clockwise 2D convex hull (monotone chain) and shoelace area.

    Raises:
        DegenerateInput: fewer than 3 distinct points, or all collinear.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateInput(f"2D hull needs >= 3 points, got {len(pts)}")
    uniq = np.unique(pts, axis=0)            # sorts lexicographically by (x, y)
    if len(uniq) < 3:
        raise DegenerateInput("fewer than 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in uniq[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.asarray(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise DegenerateInput("points are collinear")
    x, y = hull[:, 0], hull[:, 1]
    area = 0.5 * float(np.abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    return hull, area
