"""Small synthetic point-cloud generators for demos and toy runs."""

from __future__ import annotations

import numpy as np

from . import seeding
from .measures import PointCloud


def gaussian_cloud(n: int, mean, cov, seed: int = 0) -> PointCloud:
    """n draws from a multivariate normal."""
    rng = seeding.derive_rng(seed)
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    return PointCloud(rng.multivariate_normal(mean, cov, size=n))


def skew_gaussian_pair(n: int = 10, seed: int = 0) -> tuple[PointCloud, PointCloud]:
    """Isotropic blob at the origin vs. a negatively correlated blob at (4, 4).

    The classic small instance for eyeballing how well a mini-batch plan
    recovers the full coupling.
    """
    rng = seeding.derive_rng(seed)
    x = rng.multivariate_normal([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], size=n)
    y = rng.multivariate_normal([4.0, 4.0], [[1.0, -0.8], [-0.8, 1.0]], size=n)
    return PointCloud(x), PointCloud(y)


def two_cluster(n: int, seed: int = 0, centers=((-2.5, -2.0), (2.5, 2.0)), spread: float = 0.35) -> PointCloud:
    """Two equal Gaussian blobs; the standard starting cloud for flow demos."""
    rng = seeding.derive_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    labels = rng.integers(0, len(centers), size=n)
    return PointCloud(centers[labels] + spread * rng.standard_normal((n, centers.shape[1])))


def s_shape(n: int, seed: int = 0, noise: float = 0.05) -> PointCloud:
    """Points along an S-shaped curve in the unit box, with a little jitter."""
    rng = seeding.derive_rng(seed)
    t = rng.uniform(-1.0, 1.0, size=n)
    x = 0.6 * np.sin(np.pi * t)
    pts = np.column_stack([x, t]) + noise * rng.standard_normal((n, 2))
    return PointCloud(pts)
