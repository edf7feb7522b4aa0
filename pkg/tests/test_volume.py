"""Volume estimators against analytic shapes and geometric oracles."""

import math

import numpy as np
import pytest

from pilevol.cloud import PointCloud
from pilevol.errors import DegenerateCloud, DegenerateInput, InvalidParameter
from pilevol.volume import (
    AGG_MAX,
    AGG_MEAN,
    CompensationFactor,
    GridSpec,
    column_volume_grid,
    column_volume_uniform,
    convex_hull_2d,
    footprint_area,
    hull3d_volume,
    slice_volume,
)

CONE_R, CONE_H = 0.5, 0.6
CONE_VOLUME = math.pi * CONE_R ** 2 * CONE_H / 3.0   # 0.15707963...


def sampled_cone(n=100_000, seed=0, r=CONE_R, h=CONE_H):
    """Uniform-disk sampling of a cone's upper surface (heights over XY)."""
    rng = np.random.default_rng(seed)
    radius = r * np.sqrt(rng.uniform(0, 1, n))
    theta = rng.uniform(0, 2 * math.pi, n)
    x = radius * np.cos(theta)
    y = radius * np.sin(theta)
    z = h * (1 - radius / r)
    return PointCloud(np.column_stack([x, y, z]))


def gift_wrap_hull(points: np.ndarray) -> np.ndarray:
    """Gift-wrapping 2D hull oracle; assumes no fewer than 3 distinct points."""
    pts = np.unique(points, axis=0)
    start = min(range(len(pts)), key=lambda i: (pts[i][0], pts[i][1]))
    hull = [start]
    while True:
        cur = hull[-1]
        cand = 0 if cur != 0 else 1
        for j in range(len(pts)):
            if j == cur:
                continue
            cross = ((pts[cand][0] - pts[cur][0]) * (pts[j][1] - pts[cur][1])
                     - (pts[cand][1] - pts[cur][1]) * (pts[j][0] - pts[cur][0]))
            if cross < 0 or (cross == 0 and
                             np.linalg.norm(pts[j] - pts[cur])
                             > np.linalg.norm(pts[cand] - pts[cur])):
                cand = j
        if cand == start:
            break
        hull.append(cand)
        if len(hull) > len(pts):
            raise RuntimeError("gift wrap failed to close")
    return pts[hull]


def shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


# ---------------------------------------------------------------------------
# footprint_area and uniform columns
# ---------------------------------------------------------------------------

def test_footprint_area_examples():
    assert footprint_area(1.3, 1300) == pytest.approx(0.001)
    assert footprint_area(2.6, 1) == pytest.approx(2.6)
    assert footprint_area(5.2, 520_000) == pytest.approx(1e-5)
    with pytest.raises(InvalidParameter):
        footprint_area(0.0, 10)
    with pytest.raises(InvalidParameter):
        footprint_area(1.0, 0)


def test_uniform_columns_simple():
    cloud = PointCloud([[0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]])
    est = column_volume_uniform(cloud, 0.5)
    assert est.volume == pytest.approx(2.0)
    assert est.method == "COLUMN_UNIFORM"


def test_uniform_columns_empty_cloud():
    assert column_volume_uniform(PointCloud.empty(), 1.0).volume == 0.0


def test_uniform_columns_cone_within_one_percent():
    cloud = sampled_cone()
    element = math.pi * CONE_R ** 2 / len(cloud)
    est = column_volume_uniform(cloud, element)
    assert abs(est.volume - CONE_VOLUME) / CONE_VOLUME < 0.01


def test_uniform_columns_linear_in_area_and_factor():
    cloud = sampled_cone(n=2000, seed=3)
    base = column_volume_uniform(cloud, 1e-4).volume
    assert column_volume_uniform(cloud, 3e-4).volume == pytest.approx(3 * base)
    scaled = column_volume_uniform(cloud, 1e-4, CompensationFactor(1.25))
    assert scaled.volume == pytest.approx(1.25 * base)


def test_uniform_columns_signed_vs_clamped():
    cloud = PointCloud([[0, 0, 1.0], [0, 1, -0.4]])
    signed = column_volume_uniform(cloud, 1.0, signed=True)
    clamped = column_volume_uniform(cloud, 1.0, signed=False)
    assert signed.volume == pytest.approx(0.6)
    assert clamped.volume == pytest.approx(1.0)


def test_compensation_factor_sanity_bound():
    with pytest.raises(InvalidParameter):
        CompensationFactor(2.5)
    with pytest.raises(InvalidParameter):
        CompensationFactor(0.4)


# ---------------------------------------------------------------------------
# grid columns
# ---------------------------------------------------------------------------

def test_grid_single_point():
    est = column_volume_grid(PointCloud([[0.1, 0.1, 2.0]]), GridSpec(cell_size=1.0))
    assert est.volume == pytest.approx(2.0)
    assert est.diagnostics["cell_count"] == 1


def test_grid_flat_slab_boundary_bound():
    rng = np.random.default_rng(1)
    n = 40_000
    xy = rng.uniform(0, 1, size=(n, 2))
    cloud = PointCloud(np.column_stack([xy, np.full(n, 0.3)]))
    cell = 0.05
    est = column_volume_grid(cloud, GridSpec(cell_size=cell, aggregator=AGG_MAX))
    boundary_bound = 4 * cell * 0.3        # one ring of boundary cells
    assert abs(est.volume - 0.3) <= boundary_bound
    # MEAN agrees exactly on a flat slab
    mean_est = column_volume_grid(cloud, GridSpec(cell_size=cell, aggregator=AGG_MEAN))
    assert mean_est.volume == pytest.approx(est.volume)


def test_grid_cone_mean_within_three_percent():
    est = column_volume_grid(sampled_cone(), GridSpec(cell_size=0.02, aggregator=AGG_MEAN))
    assert abs(est.volume - CONE_VOLUME) / CONE_VOLUME < 0.03


def test_grid_cone_max_overestimates_cell_top():
    # MAX reads each cell at its upper envelope, inflating sloped surfaces by
    # about half the per-cell height range; MEAN is the accurate default
    est = column_volume_grid(sampled_cone(), GridSpec(cell_size=0.02, aggregator=AGG_MAX))
    rel = (est.volume - CONE_VOLUME) / CONE_VOLUME
    assert 0.03 < rel < 0.12


def test_grid_max_monotone_in_points():
    rng = np.random.default_rng(2)
    xyz = rng.uniform(0, 1, size=(500, 3))
    spec = GridSpec(cell_size=0.1, aggregator=AGG_MAX, origin=(0.0, 0.0))
    vol = column_volume_grid(PointCloud(xyz), spec).volume
    for extra in ([0.5, 0.5, 2.0], [0.95, 0.95, 0.0], [2.0, 2.0, 1.0]):
        vol2 = column_volume_grid(PointCloud(np.vstack([xyz, extra])), spec).volume
        assert vol2 >= vol - 1e-12


def test_grid_empty_and_negative_clamp():
    assert column_volume_grid(PointCloud.empty()).volume == 0.0
    below = PointCloud([[0, 0, -1.0], [1, 1, 2.0]])
    est = column_volume_grid(below, GridSpec(cell_size=0.5))
    assert est.volume == pytest.approx(0.25 * 2.0)   # below-ground cell clamps to 0


def test_grid_spec_validation():
    with pytest.raises(InvalidParameter):
        GridSpec(cell_size=0.0)
    with pytest.raises(InvalidParameter):
        GridSpec(cell_size=0.1, aggregator="MEDIAN")


# ---------------------------------------------------------------------------
# slice baseline
# ---------------------------------------------------------------------------

def sampled_cylinder(n=60_000, seed=4, r=0.5, h=1.0):
    rng = np.random.default_rng(seed)
    radius = r * np.sqrt(rng.uniform(0, 1, n))
    theta = rng.uniform(0, 2 * math.pi, n)
    z = rng.uniform(0, h, n)
    return PointCloud(np.column_stack([radius * np.cos(theta),
                                       radius * np.sin(theta), z]))


def test_slice_cylinder_within_three_percent():
    true = math.pi * 0.25
    est = slice_volume(sampled_cylinder(), 0.1)
    assert abs(est.volume - true) / true < 0.03


def test_slice_cone_single_slab_overestimates():
    cloud = sampled_cone(n=60_000)
    est = slice_volume(cloud, CONE_H)
    # single slab integrates the base hull over the full height: ~3x truth
    assert est.volume > 1.5 * CONE_VOLUME
    assert est.volume == pytest.approx(math.pi * CONE_R ** 2 * CONE_H, rel=0.05)


def test_slice_starved_layers_underestimate():
    cloud = sampled_cone(n=60_000)
    est = slice_volume(cloud, 1.2e-5)
    assert est.volume < 0.25 * CONE_VOLUME


def test_slice_bracket_property():
    # starved estimate < truth < single-slab estimate
    cloud = sampled_cone(n=60_000)
    low = slice_volume(cloud, 1.2e-5).volume
    high = slice_volume(cloud, CONE_H).volume
    assert low < CONE_VOLUME < high


def test_slice_two_points_zero():
    est = slice_volume(PointCloud([[0, 0, 0.1], [1, 1, 0.2]]), 0.1)
    assert est.volume == 0.0


def test_slice_invalid_interval():
    with pytest.raises(InvalidParameter):
        slice_volume(PointCloud.empty(), 0.0)


# ---------------------------------------------------------------------------
# 3D hull baseline
# ---------------------------------------------------------------------------

def test_hull3d_unit_cube():
    corners = [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    est = hull3d_volume(PointCloud(corners))
    assert est.volume == pytest.approx(1.0)


def test_hull3d_tetrahedron():
    est = hull3d_volume(PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]))
    assert est.volume == pytest.approx(1.0 / 6.0)


def test_hull3d_sphere_sample_and_containment():
    rng = np.random.default_rng(8)
    direction = rng.normal(size=(10_000, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    pts = direction * rng.uniform(0, 1, 10_000)[:, None] ** (1 / 3)
    est = hull3d_volume(PointCloud(pts))
    ball = 4 * math.pi / 3
    assert 0.95 * ball <= est.volume <= ball
    # Monte-Carlo containment oracle: hull volume over the bounding cube
    probe = rng.uniform(-1, 1, size=(20_000, 3))
    inside = np.linalg.norm(probe, axis=1) <= np.linalg.norm(pts, axis=1).max()
    mc = inside.mean() * 8.0
    assert abs(est.volume - mc) / mc < 0.08


def test_hull3d_vs_grid_max_on_convex_surface():
    cloud = sampled_cone()
    hull = hull3d_volume(cloud).volume
    grid = column_volume_grid(cloud, GridSpec(cell_size=0.02, aggregator=AGG_MAX)).volume
    # the hull is the convex envelope: no lower than the rasterized columns,
    # within the boundary-ring slack of the grid
    ring = 2 * math.pi * CONE_R * 0.02 * CONE_H
    assert hull >= grid - ring


def test_hull3d_degenerate():
    with pytest.raises(DegenerateCloud):
        hull3d_volume(PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0]]))
    flat = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
    with pytest.raises(DegenerateCloud):
        hull3d_volume(flat)


# ---------------------------------------------------------------------------
# 2D hull
# ---------------------------------------------------------------------------

def test_hull2d_unit_square():
    square = [[0, 0], [1, 0], [1, 1], [0, 1]]
    poly, area = convex_hull_2d(square)
    assert area == pytest.approx(1.0)
    assert len(poly) == 4


def test_hull2d_interior_points_ignored():
    rng = np.random.default_rng(3)
    pts = np.vstack([[[0, 0], [1, 0], [1, 1], [0, 1]],
                     rng.uniform(0.1, 0.9, size=(50, 2))])
    _, area = convex_hull_2d(pts)
    assert area == pytest.approx(1.0)


def test_hull2d_ccw_orientation():
    rng = np.random.default_rng(5)
    poly, _ = convex_hull_2d(rng.uniform(size=(40, 2)))
    x, y = poly[:, 0], poly[:, 1]
    signed = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert signed > 0


def test_hull2d_matches_gift_wrap_exactly():
    rng = np.random.default_rng(7)
    for n in (5, 20, 80, 200):
        pts = rng.uniform(-1, 1, size=(n, 2))
        _, area = convex_hull_2d(pts)
        oracle = shoelace(gift_wrap_hull(pts))
        assert area == pytest.approx(oracle, abs=1e-12)


def test_hull2d_disk_area():
    rng = np.random.default_rng(9)
    radius = np.sqrt(rng.uniform(0, 1, 1000))
    theta = rng.uniform(0, 2 * math.pi, 1000)
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    _, area = convex_hull_2d(pts)
    assert 0.9 * math.pi <= area <= math.pi


def test_hull2d_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        convex_hull_2d([[0, 0], [1, 1]])
    with pytest.raises(DegenerateInput):
        convex_hull_2d([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(DegenerateInput):
        convex_hull_2d([[0, 0], [0, 0], [0, 0]])
