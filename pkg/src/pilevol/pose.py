"""Posture correction: dominant-plane detection and alignment to +Z.

The measurement scene is levelled by fitting the most populated plane
(the ground) with RANSAC, rotating the cloud so the plane normal points
along +Z via the Rodrigues axis-angle formula, and translating the cloud
so the fitted plane lands on z = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud
from .errors import DegenerateCloud, InvalidParameter, NotUnitVector

EZ = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class RansacParams:
    distance_threshold: float = 0.01   # meters
    max_iterations: int = 1000
    seed: int = 0
    min_inlier_fraction: float = 0.15

    def __post_init__(self):
        if self.distance_threshold <= 0:
            raise InvalidParameter("distance_threshold must be > 0")
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be >= 1")
        if not 0.0 < self.min_inlier_fraction <= 1.0:
            raise InvalidParameter("min_inlier_fraction must be in (0, 1]")


@dataclass(frozen=True)
class PlaneModel:
    """Plane A*x + B*y + C*z + D = 0 with unit (A, B, C) and C >= 0."""

    a: float
    b: float
    c: float
    d: float
    inlier_indices: np.ndarray = field(repr=False)
    rms_residual: float = 0.0

    @property
    def unit_normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        """Unsigned point-to-plane distances."""
        return np.abs(xyz @ self.unit_normal + self.d)


def _plane_from_points(p0, p1, p2):
    """Candidate (unit normal, d) from 3 points, or None if degenerate."""
    normal = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(normal)
    if norm < 1e-12:
        return None
    normal = normal / norm
    return normal, -float(normal @ p0)


def _refine_plane(xyz: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares plane through points: centroid + smallest covariance
    eigenvector."""
    centroid = xyz.mean(axis=0)
    centered = xyz - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    normal = eigvecs[:, 0]
    return normal, centroid


def _orient_up(normal: np.ndarray) -> np.ndarray:
    """Fix the normal sign deterministically with C >= 0 preferred."""
    a, b, c = normal
    if c < 0 or (c == 0 and (b < 0 or (b == 0 and a < 0))):
        return -normal
    return normal


def ransac_plane(cloud: PointCloud, params: RansacParams = RansacParams()) -> PlaneModel:
    """Fit the dominant plane by seeded RANSAC voting plus LS refinement.

    Each iteration samples 3 distinct points, forms a candidate plane, and
    counts inliers within ``distance_threshold``.  The winning candidate is
    refined by a least-squares fit over its inliers; the refined normal is
    oriented upward (C >= 0).  Deterministic for a fixed seed: ties on the
    inlier count keep the earlier iteration.

    Raises:
        DegenerateCloud: fewer than 3 points, all samples collinear, or no
            candidate reaching ``min_inlier_fraction``.
    """
    xyz = cloud.xyz
    n = len(cloud)
    if n < 3:
        raise DegenerateCloud(f"plane fit needs >= 3 points, got {n}")
    rng = np.random.default_rng(params.seed)
    best_count = -1
    best_plane = None
    for _ in range(params.max_iterations):
        idx = rng.choice(n, size=3, replace=False)
        candidate = _plane_from_points(xyz[idx[0]], xyz[idx[1]], xyz[idx[2]])
        if candidate is None:
            continue
        normal, d = candidate
        count = int(np.count_nonzero(np.abs(xyz @ normal + d) <= params.distance_threshold))
        if count > best_count:
            best_count = count
            best_plane = (normal, d)
    if best_plane is None or best_count < 3:
        raise DegenerateCloud("no non-degenerate plane candidate found")
    if best_count < params.min_inlier_fraction * n:
        raise DegenerateCloud(
            f"best candidate has {best_count}/{n} inliers, below "
            f"min_inlier_fraction {params.min_inlier_fraction}"
        )

    normal, d = best_plane
    vote_inliers = np.abs(xyz @ normal + d) <= params.distance_threshold
    refined_normal, centroid = _refine_plane(xyz[vote_inliers])
    refined_normal = _orient_up(refined_normal)
    refined_d = -float(refined_normal @ centroid)

    dist = np.abs(xyz @ refined_normal + refined_d)
    inlier_idx = np.flatnonzero(dist <= params.distance_threshold)
    rms = float(np.sqrt(np.mean(dist[inlier_idx] ** 2))) if inlier_idx.size else 0.0
    a, b, c = (float(v) for v in refined_normal)
    return PlaneModel(a, b, c, float(refined_d), inlier_indices=inlier_idx,
                      rms_residual=rms)


def rotation_to_up(v: np.ndarray) -> np.ndarray:
    """Rotation matrix R with R @ v = (0, 0, 1), built by Rodrigues' formula.

    The rotation axis is k = (v x ez) / |v x ez| and the angle is
    arccos(v . ez).  v = ez returns the identity; v = -ez returns the 180
    degree rotation about X, where the axis-angle form is singular.

    Raises:
        NotUnitVector: |v| differs from 1 by more than 1e-6.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise NotUnitVector(f"expected a 3-vector, got shape {v.shape}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-6:
        raise NotUnitVector(f"|v| = {np.linalg.norm(v)!r} is not 1")
    axis = np.cross(v, EZ)
    sin_theta = np.linalg.norm(axis)
    cos_theta = float(np.clip(v @ EZ, -1.0, 1.0))
    if sin_theta < 1e-12:
        if cos_theta > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    k = axis / sin_theta
    kx, ky, kz = k
    K = np.array([[0.0, -kz, ky],
                  [kz, 0.0, -kx],
                  [-ky, kx, 0.0]])
    return np.eye(3) + sin_theta * K + (1.0 - cos_theta) * (K @ K)


def correct_posture(cloud: PointCloud, plane: PlaneModel) -> PointCloud:
    """Rotate the cloud so the plane normal maps to +Z, then translate the
    rotated plane onto z = 0.

    After rotation the plane satisfies z + D = 0, so the translation is +D
    along Z.  The transform is rigid: pairwise distances are preserved.
    """
    rotation = rotation_to_up(plane.unit_normal)
    return cloud.transformed(rotation, offset=(0.0, 0.0, plane.d))
