"""Set comparison geometry over point-mesh manifolds.

Manifolds are represented by finite meshes of points; the uniform
distribution over a manifold is approximated by the uniform distribution
over its mesh.  On top of nearest-point projection distances this module
builds coverage samples (distance from a random point of one set to the
other), coverage diagrams (the CDFs of those distances in both
directions), symmetric L1/L2 losses, and the Hausdorff distance, which
upper-bounds every coverage distance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "Manifold",
    "CoverageDiagram",
    "LossPair",
    "distance_to_set",
    "coverage_samples",
    "coverage_cdf",
    "loss_pair",
    "hausdorff",
]

# Above this size a k-d tree locates nearest neighbours; distances are
# recomputed with the linear-scan formula so both paths agree bitwise.
_LINEAR_SCAN_MAX = 1024
_QUERY_CHUNK = 512

# Absolute slack for the Jensen inequality check, covering float
# round-off when the distance distribution is (near-)degenerate.
_JENSEN_SLACK = 1e-12


@dataclass(frozen=True)
class Manifold:
    """A manifold discretized by a mesh of points.

    ``intrinsic_dim`` is declared metadata (curve = 1, surface = 2, ...)
    and does not affect any computation here.
    """

    points: np.ndarray
    intrinsic_dim: int = 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"mesh must be a nonempty (m, d) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("mesh contains non-finite coordinates")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.m


def _check_pair(a: Manifold, b: Manifold) -> None:
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")


def _nearest_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Distance from each query row to its nearest point of ``points``.

    Small sets use a chunked linear scan; large sets locate the
    neighbour with a k-d tree and recompute the distance with the same
    sqrt-of-sum formula, keeping the two paths bit-identical.
    """
    if points.shape[0] <= _LINEAR_SCAN_MAX:
        out = np.empty(queries.shape[0])
        for start in range(0, queries.shape[0], _QUERY_CHUNK):
            sl = slice(start, min(start + _QUERY_CHUNK, queries.shape[0]))
            sq = np.sum((queries[sl, None, :] - points[None, :, :]) ** 2, axis=2)
            out[sl] = np.sqrt(np.min(sq, axis=1))
        return out
    tree = cKDTree(points)
    _, idx = tree.query(queries, k=1, workers=1)
    return np.sqrt(np.sum((queries - points[idx]) ** 2, axis=1))


def distance_to_set(x, s: Manifold) -> float:
    """Euclidean projection distance from a point to the mesh of ``s``."""
    q = np.asarray(x, dtype=float)
    if q.ndim != 1 or q.shape[0] != s.d:
        raise ValueError(f"expected a d={s.d} vector, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("query contains non-finite coordinates")
    return float(_nearest_dists(q[None, :], s.points)[0])


def coverage_samples(
    a: Manifold,
    b: Manifold,
    rng: np.random.Generator,
    n_samples: int | None = None,
) -> np.ndarray:
    """Distances from uniformly drawn mesh points of ``a`` to ``b``.

    Draws ``n_samples`` points (default: one per mesh point of ``a``)
    uniformly with replacement.  Every sample is bounded by the
    Hausdorff distance between the two sets.
    """
    _check_pair(a, b)
    size = a.m if n_samples is None else int(n_samples)
    if size < 1:
        raise ValueError("n_samples must be >= 1")
    idx = rng.integers(0, a.m, size=size)
    return _nearest_dists(a.points[idx], b.points)


def coverage_cdf(a: Manifold, b: Manifold, radii) -> "CoverageDiagram":
    """Empirical coverage CDFs between two meshes on a radius grid.

    cdf_12(r) is the fraction of ``a``'s mesh within distance r of
    ``b``, and cdf_21 the reverse.  Deterministic: every mesh point is
    used, no sampling.
    """
    _check_pair(a, b)
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ValueError("radii must be a nonempty 1-D grid")
    if np.any(r < 0.0) or np.any(np.diff(r) < 0.0):
        raise ValueError("radii must be nonnegative and nondecreasing")
    d_ab = _nearest_dists(a.points, b.points)
    d_ba = _nearest_dists(b.points, a.points)
    cdf_12 = np.mean(d_ab[None, :] <= r[:, None], axis=1)
    cdf_21 = np.mean(d_ba[None, :] <= r[:, None], axis=1)
    return CoverageDiagram(radii=r, cdf_12=cdf_12, cdf_21=cdf_21)


def loss_pair(a: Manifold, b: Manifold) -> "LossPair":
    """Symmetric L1/L2 losses between two meshes.

    loss1 = (mean_a d(., b) + mean_b d(., a)) / 2 and loss2 is the same
    with squared distances.  Expectations run over all mesh points, so
    loss_pair(a, b) == loss_pair(b, a).
    """
    _check_pair(a, b)
    d_ab = _nearest_dists(a.points, b.points)
    d_ba = _nearest_dists(b.points, a.points)
    loss1 = 0.5 * (float(np.mean(d_ab)) + float(np.mean(d_ba)))
    loss2 = 0.5 * (float(np.mean(d_ab**2)) + float(np.mean(d_ba**2)))
    return LossPair(loss1=loss1, loss2=loss2)


def hausdorff(a: Manifold, b: Manifold) -> float:
    """Hausdorff distance between two meshes.

    The smallest r such that each set lies within the r-dilation of the
    other; exact over the discretizations.
    """
    _check_pair(a, b)
    d_ab = _nearest_dists(a.points, b.points)
    d_ba = _nearest_dists(b.points, a.points)
    return float(max(np.max(d_ab), np.max(d_ba)))


@dataclass(frozen=True)
class CoverageDiagram:
    """Coverage CDFs of two meshes over a shared radius grid."""

    radii: np.ndarray
    cdf_12: np.ndarray
    cdf_21: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        c12 = np.asarray(self.cdf_12, dtype=float)
        c21 = np.asarray(self.cdf_21, dtype=float)
        if not (r.shape == c12.shape == c21.shape) or r.ndim != 1:
            raise ValueError("radii and CDFs must be 1-D arrays of equal length")
        for c in (c12, c21):
            if np.any(c < 0.0) or np.any(c > 1.0) or np.any(np.diff(c) < 0.0):
                raise ValueError("CDF values must be nondecreasing within [0, 1]")
        for arr, name in ((r, "radii"), (c12, "cdf_12"), (c21, "cdf_21")):
            frozen = arr.copy()
            frozen.setflags(write=False)
            object.__setattr__(self, name, frozen)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "cdf_12", "cdf_21"])
            for r, c12, c21 in zip(self.radii, self.cdf_12, self.cdf_21):
                writer.writerow([repr(float(r)), repr(float(c12)), repr(float(c21))])


@dataclass(frozen=True)
class LossPair:
    """Symmetric L1/L2 loss summary; loss1^2 <= loss2 by Jensen."""

    loss1: float
    loss2: float

    def __post_init__(self):
        if self.loss1 < 0.0 or self.loss2 < 0.0:
            raise ValueError("losses must be nonnegative")
        if self.loss1**2 > self.loss2 + _JENSEN_SLACK:
            raise ValueError(
                f"Jensen violation: loss1^2={self.loss1**2} > loss2={self.loss2}"
            )
