"""Velocity extraction from pairs of reconstructed density frames.

Two routes are provided.  The sparse route detects particle blobs in each
frame and matches them between consecutive frames (mutual nearest
neighbours), giving one displacement vector per matched particle.  The
dense route is a Horn-Schunck optical flow solve on a frame pair, giving
a velocity vector per grid cell.

The Horn-Schunck iteration here is the exact per-cell solve of the
discrete Euler-Lagrange system with a degree-aware neighbour sum, so
border cells (3 neighbours on an edge, 2 in a corner) satisfy their own
stationarity equations instead of borrowing padded values.  That makes
the sweep a block-Jacobi method on a symmetric positive semidefinite
system and the discrete energy nonincreasing across iterations.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .grid import DensityField, Grid

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)
OBSERVABLE_FRACTION = 0.01  # flow is reported only where frames hold mass


@dataclass
class DetectedParticles:
    """Blob centroids found in one density frame, heaviest first."""

    centers: np.ndarray  # (n, 2), meters
    masses: np.ndarray  # (n,), sum of field values per blob
    threshold: float

    def __post_init__(self) -> None:
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if self.centers.shape[0] != self.masses.shape[0]:
            raise ValueError("centers and masses must align")
        if np.any(self.masses <= 0.0):
            raise ValueError("blob masses must be positive")

    def __len__(self) -> int:
        return self.centers.shape[0]

    def top(self, count: int) -> "DetectedParticles":
        return DetectedParticles(self.centers[:count], self.masses[:count], self.threshold)


def detect_particles(
    frame: DensityField,
    threshold: float = 0.5,
) -> DetectedParticles:
    """Find particle blobs as 4-connected components above a threshold.

    The threshold is a fraction of the frame maximum; cells with value
    >= threshold * max belong to blobs.  Centroids are mass-weighted over
    each component, in physical coordinates.  Results are sorted by mass,
    heaviest first.  An empty or non-positive frame yields no detections.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be a fraction in (0, 1)")
    values = frame.values
    grid = frame.grid
    peak = float(values.max())
    if peak <= 0.0:
        return DetectedParticles(np.empty((0, 2)), np.empty(0), threshold)
    mask = values >= threshold * peak
    labels, count = ndimage.label(mask, structure=FOUR_CONNECTED)
    weighted = np.where(mask, values, 0.0)
    idx = np.arange(1, count + 1)
    masses = np.asarray(ndimage.sum_labels(weighted, labels, idx), dtype=float)
    centroids = np.asarray(
        ndimage.center_of_mass(weighted, labels, idx), dtype=float
    ).reshape(-1, 2)  # (row, col) pairs
    centers = np.column_stack(
        [(centroids[:, 1] + 0.5) * grid.dx, (centroids[:, 0] + 0.5) * grid.dy]
    )
    order = np.argsort(masses)[::-1]
    return DetectedParticles(centers[order], masses[order], threshold)


@dataclass
class FlowEstimate:
    """A velocity estimate, either sparse (per matched particle) or dense.

    Sparse estimates carry attribution points and one vector per point.
    Dense estimates carry per-cell components on the frame grid plus the
    observability mask (cells where the frames actually held mass) and
    the energy trace of the optical-flow iteration.
    """

    frame_period: float
    points: np.ndarray | None = None  # (m, 2) sparse attribution points
    velocities: np.ndarray | None = None  # (m, 2) sparse vectors
    u: np.ndarray | None = None  # (ny, nx) dense x-component
    v: np.ndarray | None = None  # (ny, nx) dense y-component
    grid: Grid | None = None
    observable: np.ndarray | None = None  # (ny, nx) bool, dense only
    energies: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.frame_period <= 0:
            raise ValueError("frame period must be positive")
        sparse = self.points is not None
        dense = self.u is not None
        if sparse == dense:
            raise ValueError("estimate must be exactly one of sparse or dense")
        if sparse:
            self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
            self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
            if self.points.shape != self.velocities.shape:
                raise ValueError("points and velocities must align")
            if not (np.isfinite(self.points).all() and np.isfinite(self.velocities).all()):
                raise ValueError("sparse estimate contains non-finite entries")
        else:
            self.u = np.asarray(self.u, dtype=float)
            self.v = np.asarray(self.v, dtype=float)
            if self.u.shape != self.v.shape:
                raise ValueError("dense components must share a shape")
            if self.grid is not None and self.u.shape != self.grid.shape:
                raise ValueError("dense estimate must match the grid shape")
            if not (np.isfinite(self.u).all() and np.isfinite(self.v).all()):
                raise ValueError("dense estimate contains non-finite entries")
            if self.observable is not None:
                self.observable = np.asarray(self.observable, dtype=bool)
                if self.observable.shape != self.u.shape:
                    raise ValueError("observability mask must match the components")

    @property
    def is_dense(self) -> bool:
        return self.u is not None

    @property
    def speed(self) -> np.ndarray:
        if self.is_dense:
            return np.hypot(self.u, self.v)
        return np.linalg.norm(self.velocities, axis=1)

    def mean_velocity(self, region: np.ndarray | None = None) -> np.ndarray:
        """Spatial average vector, optionally restricted to a region.

        For dense estimates the region is a boolean cell mask; for sparse
        ones it is a boolean mask over the attribution points.
        """
        if self.is_dense:
            if region is None:
                region = np.ones(self.u.shape, dtype=bool)
            if region.shape != self.u.shape:
                raise ValueError("region does not match the estimate")
            if not region.any():
                raise ValueError("region is empty")
            return np.array([self.u[region].mean(), self.v[region].mean()])
        vel = self.velocities if region is None else self.velocities[region]
        if len(vel) == 0:
            raise ValueError("no velocity vectors in the region")
        return vel.mean(axis=0)

    def at_points(self, points) -> np.ndarray:
        """Bilinear sample of a dense estimate's (u, v) at physical points.

        Points outside the grid clamp to the border cells.
        """
        if not self.is_dense:
            raise ValueError("point sampling needs a dense estimate")
        if self.grid is None:
            raise ValueError("dense estimate carries no grid")
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        g = self.grid
        cols = np.clip(pts[:, 0] / g.dx - 0.5, 0.0, g.nx - 1.0)
        rows = np.clip(pts[:, 1] / g.dy - 0.5, 0.0, g.ny - 1.0)
        uu = ndimage.map_coordinates(self.u, [rows, cols], order=1, mode="nearest")
        vv = ndimage.map_coordinates(self.v, [rows, cols], order=1, mode="nearest")
        return np.column_stack([uu, vv])


def _match_pair(
    first: DetectedParticles, second: DetectedParticles
) -> tuple[np.ndarray, np.ndarray]:
    """Mutual-nearest pairs between two detection lists.

    argmin takes the smallest index on distance ties; a pair survives
    only when each blob is the other's nearest, which drops spurious
    one-sided matches.
    """
    a, b = first.centers, second.centers
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    fwd = np.argmin(d, axis=1)
    bwd = np.argmin(d, axis=0)
    i_idx = np.arange(len(a))
    mutual = bwd[fwd] == i_idx
    pairs = np.column_stack([i_idx[mutual], fwd[mutual]])
    return pairs, d[pairs[:, 0], pairs[:, 1]]


def nearest_point_velocities(
    frames: list[DetectedParticles],
    frame_period: float,
) -> FlowEstimate:
    """Sparse velocities from nearest-point matching of consecutive frames.

    Each centroid is matched to its nearest centroid in the next frame
    (mutual matches only); the velocity is the displacement over the
    frame period, attributed to the midpoint of the pair, which is the
    second-order accurate location for a particle crossing the interval.
    Pairs where some displacement reaches half the minimum inter-particle
    distance are kept but flagged with a warning, since matches are then
    no longer guaranteed unambiguous.  Frames with zero detections skip
    their pairs with a warning.
    """
    if len(frames) < 2:
        raise ValueError("need at least two frames to estimate velocities")
    if frame_period <= 0:
        raise ValueError("frame period must be positive")
    points = []
    vectors = []
    for k in range(len(frames) - 1):
        first, second = frames[k], frames[k + 1]
        if len(first) == 0 or len(second) == 0:
            warnings.warn(f"frame pair ({k}, {k + 1}) has no detections, skipped")
            continue
        pairs, moved = _match_pair(first, second)
        if len(first) > 1:
            d_self = np.linalg.norm(
                first.centers[:, None, :] - first.centers[None, :, :], axis=2
            )
            min_sep = d_self[~np.eye(len(first), dtype=bool)].min()
            if moved.size and moved.max() >= 0.5 * min_sep:
                warnings.warn(
                    "displacement reaches half the inter-particle spacing, "
                    "matches may be ambiguous"
                )
        pa = first.centers[pairs[:, 0]]
        pb = second.centers[pairs[:, 1]]
        points.append(0.5 * (pa + pb))
        vectors.append((pb - pa) / frame_period)
    if not points:
        raise ValueError("no frame pair produced any matches")
    return FlowEstimate(
        frame_period=frame_period,
        points=np.concatenate(points),
        velocities=np.concatenate(vectors),
    )


def _neighbor_sum(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[1:, :] += a[:-1, :]
    out[:-1, :] += a[1:, :]
    out[:, 1:] += a[:, :-1]
    out[:, :-1] += a[:, 1:]
    return out


def flow_energy(
    u: np.ndarray,
    v: np.ndarray,
    ix: np.ndarray,
    iy: np.ndarray,
    it: np.ndarray,
    alpha: float,
) -> float:
    """Discrete optical-flow energy: data term plus edgewise smoothness."""
    data = np.sum((ix * u + iy * v + it) ** 2)
    smooth = (
        np.sum((u[1:, :] - u[:-1, :]) ** 2)
        + np.sum((u[:, 1:] - u[:, :-1]) ** 2)
        + np.sum((v[1:, :] - v[:-1, :]) ** 2)
        + np.sum((v[:, 1:] - v[:, :-1]) ** 2)
    )
    return float(data + alpha**2 * smooth)


def _hs_pass(
    f1: np.ndarray,
    f2: np.ndarray,
    grid: Grid,
    frame_period: float,
    alpha: float,
    iterations: int,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """One linearized solve: Jacobi sweeps on the Euler-Lagrange system."""
    ix = 0.5 * (np.gradient(f1, grid.dx, axis=1) + np.gradient(f2, grid.dx, axis=1))
    iy = 0.5 * (np.gradient(f1, grid.dy, axis=0) + np.gradient(f2, grid.dy, axis=0))
    it = (f2 - f1) / frame_period

    deg = _neighbor_sum(np.ones(f1.shape))
    u = np.zeros_like(f1)
    v = np.zeros_like(f1)
    denom = alpha**2 * deg + ix**2 + iy**2
    energies = [flow_energy(u, v, ix, iy, it, alpha)]
    for _ in range(iterations):
        ubar = _neighbor_sum(u) / deg
        vbar = _neighbor_sum(v) / deg
        p = ix * ubar + iy * vbar + it
        u = ubar - ix * p / denom
        v = vbar - iy * p / denom
        energies.append(flow_energy(u, v, ix, iy, it, alpha))
    return u, v, energies


def _warp_by_flow(
    values: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    frame_period: float,
    grid: Grid,
) -> np.ndarray:
    """Pull the second frame back along the current flow, bilinearly."""
    jj, ii = np.meshgrid(
        np.arange(values.shape[0]), np.arange(values.shape[1]), indexing="ij"
    )
    rows = jj + v * frame_period / grid.dy
    cols = ii + u * frame_period / grid.dx
    return ndimage.map_coordinates(values, [rows, cols], order=1, mode="nearest")


def horn_schunck(
    frame_a: DensityField,
    frame_b: DensityField,
    frame_period: float,
    alpha: float = 0.5,
    iterations: int = 200,
    presmooth_sigma: float = 0.0,
    refinements: int = 0,
) -> FlowEstimate:
    """Dense optical flow between two frames, in physical units.

    Minimizes sum (I_x u + I_y v + I_t)^2 + alpha^2 (|grad u|^2 + |grad v|^2)
    by Jacobi sweeps.  Spatial gradients are averaged over the two frames
    (central differences, one-sided at the borders); the temporal gradient
    is the frame difference over the frame period, so velocities come out
    in meters per second.  The default alpha assumes frame intensities of
    order one; it is not scale-invariant, so normalize frames or scale
    alpha along with them.

    The linearized data term biases the estimate once displacements pass
    about one cell.  Each refinement re-estimates the flow against the
    second frame pulled back along the current estimate and accumulates
    the residual, which restores accuracy out to several cells without
    changing the single-pass behavior at refinements=0.  The energy trace
    belongs to the last pass (the final residual problem).
    """
    if frame_a.grid.shape != frame_b.grid.shape:
        raise ValueError("frames must share a grid")
    if frame_period <= 0:
        raise ValueError("frame period must be positive")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    if refinements < 0:
        raise ValueError("refinements must be nonnegative")
    grid = frame_a.grid
    f1 = frame_a.values
    f2 = frame_b.values
    if presmooth_sigma > 0.0:
        f1 = ndimage.gaussian_filter(f1, presmooth_sigma)
        f2 = ndimage.gaussian_filter(f2, presmooth_sigma)

    u, v, energies = _hs_pass(f1, f2, grid, frame_period, alpha, iterations)
    for _ in range(refinements):
        f2w = _warp_by_flow(f2, u, v, frame_period, grid)
        du, dv, energies = _hs_pass(f1, f2w, grid, frame_period, alpha, iterations)
        u = u + du
        v = v + dv

    peak = max(float(f1.max()), float(f2.max()))
    if peak > 0.0:
        observable = (f1 > OBSERVABLE_FRACTION * peak) | (f2 > OBSERVABLE_FRACTION * peak)
    else:
        observable = np.zeros(f1.shape, dtype=bool)
    return FlowEstimate(
        frame_period=frame_period,
        u=u,
        v=v,
        grid=grid,
        observable=observable,
        energies=np.asarray(energies),
    )


def velocity_error(estimate: FlowEstimate, truth, mask=None, time: float = 0.0) -> float:
    """Relative L2 error of an estimate against a true velocity field.

    The truth is evaluated at the estimate's own support: attribution
    points for sparse estimates, masked cell centers for dense ones.  A
    dense estimate defaults to its observability mask, since the flow is
    meaningless where the frames held no mass.
    """
    if estimate.is_dense:
        if estimate.grid is None:
            raise ValueError("dense estimate carries no grid")
        if mask is None:
            mask = estimate.observable
        if mask is None or not np.any(mask):
            raise ValueError("mask selects no cells")
        xx, yy = np.meshgrid(estimate.grid.x_centers, estimate.grid.y_centers)
        pts = np.column_stack([xx[mask], yy[mask]])
        est = np.column_stack([estimate.u[mask], estimate.v[mask]])
    else:
        pts = estimate.points
        est = estimate.velocities
        if mask is not None:
            pts = pts[mask]
            est = est[mask]
        if len(pts) == 0:
            raise ValueError("mask selects no points")
    true = truth.evaluate(pts, time)
    ref = float(np.linalg.norm(true))
    if ref == 0.0:
        raise ValueError("true velocities vanish on the mask")
    return float(np.linalg.norm(est - true) / ref)


def matching_distances(found: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Distances after optimal one-to-one assignment of found to true points.

    With unequal counts only min(n, m) pairs are formed.
    """
    found = np.asarray(found, dtype=float).reshape(-1, 2)
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    if len(found) == 0 or len(truth) == 0:
        return np.empty(0)
    cost = np.linalg.norm(found[:, None, :] - truth[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols]


# ---------------------------------------------------------------------------
# exports


def save_sparse_csv(estimate: FlowEstimate, path) -> Path:
    """Write a sparse estimate as CSV rows (x, y, u, v)."""
    if estimate.is_dense:
        raise ValueError("expected a sparse estimate")
    path = Path(path)
    lines = ["x,y,u,v"]
    for (x, y), (vu, vv) in zip(estimate.points, estimate.velocities):
        lines.append(f"{x:.17g},{y:.17g},{vu:.17g},{vv:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def save_dense_flow(estimate: FlowEstimate, base_path) -> Path:
    """Write a dense estimate in the two-component raw field format."""
    from .flow import VelocityField, save_velocity_field

    if not estimate.is_dense:
        raise ValueError("expected a dense estimate")
    if estimate.grid is None:
        raise ValueError("dense estimate carries no grid")
    stacked = np.stack([estimate.u, estimate.v], axis=-1)[None]
    field = VelocityField.sampled(stacked, estimate.grid.lx, estimate.grid.ly)
    return save_velocity_field(field, base_path)


def flow_to_hsv_png(estimate: FlowEstimate, path) -> Path:
    """Render a dense estimate as a PNG: hue is direction, saturation speed.

    Unobservable cells are desaturated to white.  Rows are flipped so the
    image's top edge is the domain's top edge.
    """
    from PIL import Image

    if not estimate.is_dense:
        raise ValueError("expected a dense estimate")
    speed = estimate.speed
    top = float(speed.max())
    sat = speed / top if top > 0 else np.zeros_like(speed)
    if estimate.observable is not None:
        sat = np.where(estimate.observable, sat, 0.0)
    hue = np.mod(np.arctan2(estimate.v, estimate.u) / (2.0 * np.pi), 1.0)
    hsv = np.stack(
        [
            np.round(255.0 * hue).astype(np.uint8),
            np.round(255.0 * sat).astype(np.uint8),
            np.full(hue.shape, 255, dtype=np.uint8),
        ],
        axis=-1,
    )
    path = Path(path)
    Image.fromarray(hsv[::-1], mode="HSV").convert("RGB").save(path)
    return path


def save_flow_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
