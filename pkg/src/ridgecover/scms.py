"""Subspace constrained mean shift (SCMS) ridge extraction.

Mesh points are iterated along the mean-shift displacement projected
onto the local normal subspace until they land on a ridge of the kernel
density estimate.  The normal subspace at x is spanned by the trailing
d-1 eigenvectors of the log-density Hessian (the local inverse
covariance), the convention of the original algorithm: it sends
points sitting on the outer slopes of a filament inward instead of
leaving them stranded on spurious transverse crests.  Ridge membership
itself is tested on the plain density Hessian: a retained point has
lambda2 < 0 there, matching the ridge definition.

For the Gaussian kernel the mean-shift displacement has the closed form
m(x) - x = -h * s1 / s0 in terms of the raw kernel sums, which this
module reuses from :mod:`ridgecover.kde`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kde import KernelModel, PointCloud, _kernel_sums, _norm_const

__all__ = [
    "DivergenceError",
    "ScmsConfig",
    "RidgePoint",
    "RidgeSet",
    "scms_step",
    "extract_ridge",
]

# Default stopping tolerance on the displacement norm, as a fraction of h.
DEFAULT_TOLERANCE_FACTOR = 1e-6


class DivergenceError(RuntimeError):
    """Raised when an iterate leaves the support of the estimate.

    Happens when the kernel sum underflows to zero at the query, so the
    mean-shift target is undefined."""


@dataclass(frozen=True)
class ScmsConfig:
    """Knobs for the SCMS iteration.

    ``tolerance`` is the stopping threshold on the displacement norm per
    step; ``None`` means 1e-6 * h, resolved when the bandwidth is known.
    ``mesh`` selects the initial points: ``"data"`` starts one
    trajectory per data point, ``"grid"`` builds an axis-aligned grid
    over the data bounding box with spacing <= ``grid_resolution``.
    Retained ridge points must have density at least
    ``density_threshold_fraction`` times the maximum fitted density.
    """

    max_iterations: int = 500
    tolerance: float | None = None
    mesh: str = "data"
    grid_resolution: float | None = None
    density_threshold_fraction: float = 0.05

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))
        if self.tolerance is not None and not (float(self.tolerance) > 0.0):
            raise ValueError("tolerance must be positive")
        if self.mesh not in ("data", "grid"):
            raise ValueError(f"mesh must be 'data' or 'grid', got {self.mesh!r}")
        if self.mesh == "grid":
            if self.grid_resolution is None or float(self.grid_resolution) <= 0.0:
                raise ValueError("grid mesh requires a positive grid_resolution")
        if not 0.0 <= float(self.density_threshold_fraction) <= 1.0:
            raise ValueError("density_threshold_fraction must be in [0, 1]")

    def resolved_tolerance(self, h: float) -> float:
        if self.tolerance is not None:
            return float(self.tolerance)
        return DEFAULT_TOLERANCE_FACTOR * h

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "mesh": self.mesh,
            "grid_resolution": self.grid_resolution,
            "density_threshold_fraction": self.density_threshold_fraction,
        }


@dataclass(frozen=True)
class RidgePoint:
    """A converged SCMS trajectory endpoint with its diagnostics."""

    position: np.ndarray
    density: float
    projected_gradient_norm: float
    lambda2: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class RidgeSet:
    """Retained ridge points: the discretized ridge estimate.

    Every retained point converged, has a negative second Hessian
    eigenvalue, and has density >= ``density_threshold`` (an absolute
    value, already scaled from the configured fraction).  An empty
    ``points`` list flags that every trajectory diverged or was
    filtered; callers treat that as a sentinel, not an error.
    """

    points: tuple[RidgePoint, ...]
    bandwidth: float
    density_threshold: float
    source_size: int

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for p in self.points:
            if not p.converged or p.density < self.density_threshold:
                raise ValueError("retained ridge point violates the RidgeSet contract")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def positions(self) -> np.ndarray:
        """(k, d) array of retained positions, in mesh order."""
        if not self.points:
            return np.empty((0, 0))
        return np.stack([p.position for p in self.points])

    def to_manifold(self, intrinsic_dim: int = 1):
        from .coverage import Manifold

        if not self.points:
            raise ValueError("empty ridge set has no manifold representation")
        return Manifold(self.positions, intrinsic_dim=intrinsic_dim)

    def save_csv(self, path, d: int | None = None) -> None:
        """Write positions plus per-point diagnostics as CSV."""
        if self.points:
            d = self.points[0].position.shape[0]
        elif d is None:
            d = 0
        cols = [f"x{a}" for a in range(d)]
        cols += ["density", "projected_gradient_norm", "lambda2"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for p in self.points:
                row = [repr(float(v)) for v in p.position]
                row += [repr(p.density), repr(p.projected_gradient_norm), repr(p.lambda2)]
                writer.writerow(row)

    def metadata(self, cfg: ScmsConfig | None = None) -> dict:
        meta = {
            "bandwidth": self.bandwidth,
            "density_threshold": self.density_threshold,
            "source_size": self.source_size,
            "n_ridge_points": len(self.points),
        }
        if cfg is not None:
            meta["config"] = cfg.to_dict()
        return meta

    def save_json(self, path, cfg: ScmsConfig | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(cfg), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _descending_eigh(mats: np.ndarray):
    """Eigendecompose symmetric (q, d, d) matrices, eigenvalues descending.

    Eigenvector signs are fixed so the first nonzero coordinate of each
    vector is positive; V V^T is unaffected but runs become
    reproducible bit-for-bit.
    """
    lam, vec = np.linalg.eigh(mats)  # ascending
    lam = lam[:, ::-1]
    vec = vec[:, :, ::-1]
    nz = vec != 0.0
    first = np.argmax(nz, axis=1)  # (q, d) index of first nonzero row per column
    lead = np.take_along_axis(vec, first[:, None, :], axis=1)[:, 0, :]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return np.ascontiguousarray(lam), np.ascontiguousarray(vec * sign[:, None, :])


def _project_normal(vec: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Apply V V^T to each row of t, V = trailing d-1 eigenvector columns.

    ``vec`` is (q, d, d) with columns in descending eigenvalue order;
    the leading column (ridge tangent candidate) is dropped.  Written as
    trailing-axis reductions to stay off BLAS.
    """
    v = vec[:, :, 1:]  # (q, d, k), k = d - 1
    if v.shape[2] == 0:
        return np.zeros_like(t)
    vt = np.ascontiguousarray(np.swapaxes(v, 1, 2))  # (q, k, d)
    coef = np.sum(vt * t[:, None, :], axis=2)  # (q, k)
    return np.sum(v * coef[:, None, :], axis=2)  # (q, d)


def _log_hessian_basis(s0: np.ndarray, s1: np.ndarray, s2: np.ndarray, d: int):
    """Eigenvectors of the log-density Hessian from raw kernel sums.

    grad grad log p equals ((s2 - s0*I)/s0 - s1 s1^T / s0^2) / h^2, so
    the unscaled matrix shares its eigenvectors.  Built from weighted
    means of the bounded kernel offsets, it stays well conditioned even
    where the density itself is close to underflow.
    """
    mean1 = s1 / s0[:, None]
    mean2 = s2 / s0[:, None, None]
    mat = mean2 - np.eye(d) - mean1[:, :, None] * mean1[:, None, :]
    return _descending_eigh(mat)


def _step_batch(model: KernelModel, x: np.ndarray):
    """One SCMS step for a batch of points.

    Returns (x_next, ok) where ok is False for rows whose kernel sum
    underflowed (density numerically zero).  Bad rows are passed through
    unchanged.
    """
    h = model.bandwidth
    s0, s1, s2 = _kernel_sums(model.data.points, x, h, order=2)
    ok = s0 > 0.0
    safe = np.where(ok, s0, 1.0)
    shift = -(h * s1) / safe[:, None]  # m(x) - x
    _, vec = _log_hessian_basis(safe, s1, s2, model.d)
    delta = _project_normal(vec, shift)
    x_next = np.where(ok[:, None], x + delta, x)
    return x_next, ok


def scms_step(model: KernelModel, x) -> np.ndarray:
    """Advance one point by a single projected mean-shift step.

    Returns x + V V^T (m(x) - x), where m(x) is the kernel-weighted mean
    of the data around x and V collects the trailing d-1 eigenvectors of
    the log-density Hessian at x.  Fixed points satisfy
    V V^T grad p(x) = 0.  In d=1 the normal subspace is empty, so the
    step is always the zero displacement.

    Raises :class:`DivergenceError` when the density underflows at x.
    """
    q = np.asarray(x, dtype=float)
    if q.ndim != 1 or q.shape[0] != model.d:
        raise ValueError(f"expected a d={model.d} vector, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("query contains non-finite coordinates")
    x_next, ok = _step_batch(model, q[None, :])
    if not ok[0]:
        raise DivergenceError("density underflowed to zero at the iterate")
    return x_next[0]


def _build_mesh(data: PointCloud, cfg: ScmsConfig) -> np.ndarray:
    if cfg.mesh == "data":
        return np.array(data.points, dtype=float, copy=True)
    res = float(cfg.grid_resolution)
    lo = data.points.min(axis=0)
    hi = data.points.max(axis=0)
    axes = []
    for a in range(data.d):
        if hi[a] > lo[a]:
            count = int(math.ceil((hi[a] - lo[a]) / res)) + 1
            axes.append(np.linspace(lo[a], hi[a], max(count, 2)))
        else:
            axes.append(np.array([lo[a]]))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def extract_ridge(data: PointCloud, h: float, cfg: ScmsConfig = ScmsConfig()) -> RidgeSet:
    """Run SCMS from every mesh point and collect the converged ridge.

    Each trajectory stops when its displacement norm drops below the
    tolerance or after ``max_iterations`` steps.  Non-converged points
    are discarded, as are points with a nonnegative second eigenvalue,
    points where the two leading eigenvalues tie exactly (ridge
    orientation undefined), and points whose density falls below
    ``density_threshold_fraction`` times the maximum fitted density over
    the converged endpoints and the data points.

    If everything is filtered the result is an empty RidgeSet, not an
    exception.
    """
    model = KernelModel(data, h)
    mesh = _build_mesh(data, cfg)
    if mesh.shape[0] == 0:
        raise ValueError("mesh is empty")
    tol = cfg.resolved_tolerance(h)

    x = mesh.copy()
    nq = x.shape[0]
    converged = np.zeros(nq, dtype=bool)
    failed = np.zeros(nq, dtype=bool)
    iters = np.zeros(nq, dtype=int)
    active = np.arange(nq)

    for _ in range(cfg.max_iterations):
        if active.size == 0:
            break
        x_next, ok = _step_batch(model, x[active])
        disp = np.sqrt(np.sum((x_next - x[active]) ** 2, axis=1))
        iters[active] += 1
        x[active] = x_next
        done = ok & (disp < tol)
        converged[active[done]] = True
        failed[active[~ok]] = True
        active = active[~(done | ~ok)]

    # Final diagnostics at the trajectory endpoints.  Membership uses the
    # plain Hessian eigenvalues; the convergence residual uses the same
    # log-Hessian basis the iteration projected onto.
    s0, s1, s2 = _kernel_sums(data.points, x, h, order=2)
    norm = _norm_const(data.n, data.d, h)
    dens = s0 * norm
    grad = s1 * (-norm / h)
    raw_hess = s2 - s0[:, None, None] * np.eye(data.d)
    lam_raw, _ = _descending_eigh(raw_hess)
    lam = lam_raw * (norm / h**2)
    safe = np.where(s0 > 0.0, s0, 1.0)
    _, vec = _log_hessian_basis(safe, s1, s2, data.d)
    pg = _project_normal(vec, grad)
    pg_norm = np.sqrt(np.sum(pg * pg, axis=1))
    # In d=1 there is no second eigenvalue; the only one plays its role,
    # which reduces ridge membership to the usual mode condition.
    lam2 = lam[:, 1] if data.d >= 2 else lam[:, 0]

    data_density = (
        _kernel_sums(data.points, data.points, h, order=0)[0] * norm
    )
    ok_points = converged & ~failed
    candidates = ok_points & (lam2 < 0.0)
    if data.d >= 2:
        candidates &= lam[:, 0] > lam[:, 1]
    peak = float(max(
        dens[ok_points].max() if np.any(ok_points) else 0.0,
        data_density.max(),
    ))
    threshold = cfg.density_threshold_fraction * peak
    retained = candidates & (dens >= threshold)

    points = tuple(
        RidgePoint(
            position=x[i].copy(),
            density=float(dens[i]),
            projected_gradient_norm=float(pg_norm[i]),
            lambda2=float(lam2[i]),
            iterations=int(iters[i]),
            converged=True,
        )
        for i in np.flatnonzero(retained)
    )
    return RidgeSet(
        points=points,
        bandwidth=h,
        density_threshold=threshold,
        source_size=data.n,
    )
