"""Cloud container, pass-through filtering, voxel downsampling, bounds."""

import numpy as np
import pytest

from pilevol.cloud import (
    Aabb,
    AxisRange,
    Point3,
    PointCloud,
    bounding_box,
    passthrough_filter,
    voxel_downsample,
)
from pilevol.errors import EmptyCloud, InvalidParameter, NonFiniteCoordinate


def test_cloud_count_and_order():
    pts = [[0, 0, 0], [1, 2, 3], [4, 5, 6]]
    cloud = PointCloud(pts)
    assert cloud.count == len(cloud) == 3
    assert list(cloud) == [Point3(0, 0, 0), Point3(1, 2, 3), Point3(4, 5, 6)]


def test_cloud_rejects_non_finite():
    with pytest.raises(NonFiniteCoordinate) as err:
        PointCloud([[0, 0, 0], [np.nan, 0, 0]])
    assert err.value.row == 1
    with pytest.raises(NonFiniteCoordinate):
        PointCloud([[np.inf, 0, 0]])


def test_cloud_immutable():
    cloud = PointCloud([[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        cloud.xyz[0, 0] = 9.0


def test_passthrough_z_range():
    cloud = PointCloud([[0, 0, -1], [0, 0, 0], [0, 0, 2]])
    out = passthrough_filter(cloud, [AxisRange("Z", 0.0, np.inf)])
    assert out.xyz[:, 2].tolist() == [0.0, 2.0]


def test_passthrough_empty_ranges_is_identity():
    cloud = PointCloud(np.random.default_rng(0).uniform(size=(50, 3)))
    assert passthrough_filter(cloud, []) == cloud


def test_passthrough_kept_fraction_binomial():
    # X in [0, 0.5] on uniform unit-cube points keeps about half; 99% bounds
    rng = np.random.default_rng(42)
    n = 1000
    cloud = PointCloud(rng.uniform(size=(n, 3)))
    kept = passthrough_filter(cloud, [AxisRange("X", 0.0, 0.5)])
    sigma = np.sqrt(n * 0.25)
    assert abs(len(kept) - 0.5 * n) <= 2.58 * sigma


def test_passthrough_idempotent_and_union():
    rng = np.random.default_rng(7)
    cloud = PointCloud(rng.uniform(-1, 1, size=(400, 3)))
    r1 = [AxisRange("X", -0.5, 0.5)]
    r2 = [AxisRange("Z", 0.0, 1.0)]
    once = passthrough_filter(cloud, r1)
    assert passthrough_filter(once, r1) == once
    assert passthrough_filter(passthrough_filter(cloud, r1), r2) == \
        passthrough_filter(cloud, r1 + r2)


def test_passthrough_bounds_inclusive():
    cloud = PointCloud([[0.5, 0, 0], [0.5000001, 0, 0]])
    out = passthrough_filter(cloud, [AxisRange("X", 0.0, 0.5)])
    assert len(out) == 1


def test_axis_range_validation():
    with pytest.raises(InvalidParameter):
        AxisRange("W", 0, 1)
    with pytest.raises(InvalidParameter):
        AxisRange("X", 2.0, 1.0)


def test_voxel_downsample_cube_centroid():
    corners = [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    out = voxel_downsample(PointCloud(corners), 2.0)
    assert len(out) == 1
    np.testing.assert_allclose(out.xyz[0], [0.5, 0.5, 0.5])


def test_voxel_downsample_single_point_identity():
    cloud = PointCloud([[0.3, -0.2, 5.0]])
    for size in (0.01, 1.0, 100.0):
        assert voxel_downsample(cloud, size) == cloud


def test_voxel_downsample_centroid_containment():
    rng = np.random.default_rng(3)
    cloud = PointCloud(rng.uniform(-1, 1, size=(2000, 3)))
    size = 0.3
    out = voxel_downsample(cloud, size)
    anchor = cloud.xyz.min(axis=0)
    src_cells = np.floor((cloud.xyz - anchor) / size).astype(int)
    out_cells = np.floor((out.xyz - anchor) / size).astype(int)
    src_set = {tuple(c) for c in src_cells}
    # each centroid lies inside an occupied source voxel
    for cell in out_cells:
        assert tuple(cell) in src_set
    assert len(out) == len(src_set) <= len(cloud)


def test_voxel_downsample_below_min_spacing_is_permutation():
    rng = np.random.default_rng(11)
    xyz = rng.uniform(size=(60, 3))
    dmin = np.inf
    for i in range(len(xyz)):
        d = np.linalg.norm(xyz - xyz[i], axis=1)
        d[i] = np.inf
        dmin = min(dmin, d.min())
    # cube diagonal below the min pairwise distance: no two points share a cell
    out = voxel_downsample(PointCloud(xyz), 0.99 * dmin / np.sqrt(3))
    assert len(out) == len(xyz)
    assert np.array_equal(np.sort(out.xyz, axis=0), np.sort(xyz, axis=0))


def test_voxel_downsample_compression_ratio_on_dense_pile():
    # dense pile surface at 1e5 pts/m^2; 0.02 m voxels land the point-count
    # ratio in the regime where accuracy is still expected to hold
    rng = np.random.default_rng(5)
    n = 100_000
    xy = rng.uniform(-0.5, 0.5, size=(n, 2))
    r = np.hypot(xy[:, 0], xy[:, 1])
    z = np.maximum(0.6 * (1 - r / 0.5), 0.0)
    cloud = PointCloud(np.column_stack([xy, z]) + rng.normal(0, 0.003, (n, 3)))
    out = voxel_downsample(cloud, 0.02)
    ratio = len(out) / len(cloud)
    assert 0.06 <= ratio <= 0.10


def test_voxel_downsample_invalid_size():
    with pytest.raises(InvalidParameter):
        voxel_downsample(PointCloud([[0, 0, 0]]), 0.0)


def test_bounding_box_examples():
    box = bounding_box(PointCloud([[0, 0, 0]]))
    assert box.min_corner == box.max_corner == Point3(0, 0, 0)
    box = bounding_box(PointCloud([[-1, 2, 0], [3, -2, 5]]))
    assert box.min_corner == Point3(-1, -2, 0)
    assert box.max_corner == Point3(3, 2, 5)


def test_bounding_box_contains_all_points():
    rng = np.random.default_rng(9)
    cloud = PointCloud(rng.uniform(size=(10_000, 3)))
    box = bounding_box(cloud)
    assert box.contains(cloud.xyz).all()
    assert all(0.0 <= v <= 1.0 for corner in (box.min_corner, box.max_corner)
               for v in corner)


def test_bounding_box_empty_raises():
    with pytest.raises(EmptyCloud):
        bounding_box(PointCloud.empty())


def test_aabb_invariant():
    with pytest.raises(InvalidParameter):
        Aabb(Point3(1, 0, 0), Point3(0, 0, 0))
