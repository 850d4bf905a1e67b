"""Virtual acoustic Doppler current profiler baseline.

A planar reduction of the instrument: two beams tilted symmetrically from
the vertical, each split into range cells shaped as slices of a narrow
cone.  The virtual instrument reads the true velocity field directly (its
homogeneity assumption made literal): per cell it averages the projection
of the flow onto the beam axis, and the two beam averages recombine into
one planar vector.  No echoes are simulated; this is the idealized
baseline the wave-equation pipeline is compared against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid
from .velocimetry import FlowEstimate

DEFAULT_TILT = math.radians(20.0)
DEFAULT_CONE_HALF_ANGLE = math.radians(2.0)
DEFAULT_CELL_SPAN = (0.1, 0.9)
DEFAULT_CARRIER_HZ = 1.0e6


def doppler_shift(u_hat: float, phi: float, c: float, q_s: float):
    """Doppler frequency shift 2 * u_hat * sin(phi) * q_s / c.

    u_hat is the beam-projected flow speed, phi the beam angle from the
    vertical, c the sound speed and q_s the carrier frequency.  Exactly
    antisymmetric in u_hat.  Accepts arrays in u_hat.
    """
    if c <= 0:
        raise ValueError("sound speed must be positive")
    return 2.0 * np.asarray(u_hat) * math.sin(phi) * q_s / c


@dataclass(frozen=True)
class BeamGeometry:
    """Two downward beams at +/- tilt from vertical, split into range cells.

    Cell ranges are distances along the beam axis from the origin; the
    cell cross-section at distance s is the cone of the given half-angle,
    so cells are planar frustum slices.  The tilt may be zero (both beams
    collapse onto the vertical axis), which is useful for symmetry checks
    but leaves the horizontal component unrecoverable.
    """

    origin: tuple[float, float]
    tilt: float = DEFAULT_TILT
    cone_half_angle: float = DEFAULT_CONE_HALF_ANGLE
    cell_ranges: tuple[tuple[float, float], ...] = ()
    beam_signs: tuple[float, ...] = (1.0, -1.0)
    carrier_hz: float = DEFAULT_CARRIER_HZ

    def __post_init__(self) -> None:
        if not 0.0 <= self.tilt < 0.5 * math.pi:
            raise ValueError("beam tilt must lie in [0, pi/2)")
        if self.cone_half_angle <= 0.0:
            raise ValueError("cone half-angle must be positive")
        if self.carrier_hz <= 0.0:
            raise ValueError("carrier frequency must be positive")
        if not self.cell_ranges:
            raise ValueError("geometry needs at least one cell range")
        prev_hi = -math.inf
        for lo, hi in self.cell_ranges:
            if not 0.0 <= lo < hi:
                raise ValueError("cell ranges must be ordered intervals past the origin")
            if lo < prev_hi:
                raise ValueError("cell ranges must not overlap along the beam")
            prev_hi = hi

    @property
    def n_cells(self) -> int:
        return len(self.cell_ranges)

    def beam_direction(self, sign: float) -> np.ndarray:
        """Unit vector of one beam, pointing down into the domain."""
        return np.array([sign * math.sin(self.tilt), -math.cos(self.tilt)])

    @classmethod
    def for_grid(
        cls,
        grid: Grid,
        n_cells: int = 10,
        span: tuple[float, float] = DEFAULT_CELL_SPAN,
        tilt: float = DEFAULT_TILT,
        cone_half_angle: float = DEFAULT_CONE_HALF_ANGLE,
        origin: tuple[float, float] | None = None,
        carrier_hz: float = DEFAULT_CARRIER_HZ,
    ) -> "BeamGeometry":
        """Instrument at the top of the domain with uniform range cells.

        The cells cover the stated span of the shortest beam's segment
        inside the domain, by default the middle 10%..90%, mirroring a
        profiler's blanking distance and far-range cutoff.
        """
        if origin is None:
            origin = (0.5 * grid.lx, grid.ly)
        geom = cls(
            origin=origin,
            tilt=tilt,
            cone_half_angle=cone_half_angle,
            cell_ranges=((0.0, 1.0),),  # placeholder, replaced below
            carrier_hz=carrier_hz,
        )
        reach = min(
            _beam_reach(origin, geom.beam_direction(sign), grid.lx, grid.ly)
            for sign in geom.beam_signs
        )
        lo, hi = span
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("span must be an ordered pair of fractions")
        edges = np.linspace(lo * reach, hi * reach, n_cells + 1)
        ranges = tuple((float(edges[i]), float(edges[i + 1])) for i in range(n_cells))
        return cls(
            origin=origin,
            tilt=tilt,
            cone_half_angle=cone_half_angle,
            cell_ranges=ranges,
            carrier_hz=carrier_hz,
        )


def _beam_reach(origin, direction, lx: float, ly: float) -> float:
    """Distance along the beam until it leaves [0, lx] x [0, ly]."""
    reach = math.inf
    for o, d, hi in ((origin[0], direction[0], lx), (origin[1], direction[1], ly)):
        if d > 1e-15:
            reach = min(reach, (hi - o) / d)
        elif d < -1e-15:
            reach = min(reach, (0.0 - o) / d)
    if not math.isfinite(reach) or reach <= 0.0:
        raise ValueError("beam does not enter the domain")
    return reach


def build_cells(geom: BeamGeometry, grid: Grid) -> list[list[np.ndarray]]:
    """Boolean grid masks of every beam cell: cells[beam][range] is (ny, nx).

    A grid cell belongs to the range whose along-beam interval contains
    its center (so ranges of one beam never share a cell), and lies in
    the cone when the cell rectangle touches it: the center's lateral
    distance, reduced by the rectangle's support radius toward the axis,
    is within the cone radius at that range.  As the cone angle shrinks
    the mask collapses onto the cells crossed by the axis segment.
    """
    xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
    masks: list[list[np.ndarray]] = []
    for b, sign in enumerate(geom.beam_signs):
        d = geom.beam_direction(sign)
        px = xx - geom.origin[0]
        py = yy - geom.origin[1]
        along = px * d[0] + py * d[1]
        lateral = np.abs(-px * d[1] + py * d[0])
        support = 0.5 * (abs(d[1]) * grid.dx + abs(d[0]) * grid.dy)
        in_cone = np.maximum(lateral - support, 0.0) <= along * math.tan(geom.cone_half_angle)
        beam_masks = []
        for ci, (lo, hi) in enumerate(geom.cell_ranges):
            mask = (along >= lo) & (along < hi) & in_cone
            if not mask.any():
                raise ValueError(
                    f"beam {b} cell {ci} (range {lo:.4g}..{hi:.4g}) covers no grid cells"
                )
            beam_masks.append(mask)
        masks.append(beam_masks)
    return masks


@dataclass
class VadcpReading:
    """Per-cell projected velocities and shifts, plus the aggregate vector.

    projected[b, i] is the mask-averaged flow projection onto beam b in
    range cell i; shifts holds the corresponding Doppler shifts.  The
    aggregate recombines the two per-beam means into a planar vector.
    """

    projected: np.ndarray  # (n_beams, n_cells), m/s
    shifts: np.ndarray  # (n_beams, n_cells), Hz
    aggregate: np.ndarray  # (2,), m/s
    geometry: BeamGeometry = field(repr=False, default=None)

    def __post_init__(self) -> None:
        self.projected = np.asarray(self.projected, dtype=float)
        self.shifts = np.asarray(self.shifts, dtype=float)
        self.aggregate = np.asarray(self.aggregate, dtype=float)
        for a in (self.projected, self.shifts, self.aggregate):
            if not np.isfinite(a).all():
                raise ValueError("reading contains non-finite entries")


def vadcp_measure(
    velocity_field,
    geom: BeamGeometry,
    grid: Grid,
    time: float = 0.0,
    cells: list[list[np.ndarray]] | None = None,
) -> VadcpReading:
    """Read the instrument against a true velocity field.

    Per cell, the field is projected onto the beam axis and averaged over
    the cell's grid mask; the per-beam cell averages are then averaged
    and the two beam projections recombine into a planar vector:

        u_x = (m+ - m-) / (2 sin tilt),  u_y = -(m+ + m-) / (2 cos tilt).

    Exact on spatially uniform fields.  Requires a nonzero tilt, since a
    vertical pair carries no horizontal information.
    """
    if geom.tilt <= 0.0:
        raise ValueError("recombination needs a nonzero beam tilt")
    if cells is None:
        cells = build_cells(geom, grid)
    xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
    projected = np.zeros((len(geom.beam_signs), geom.n_cells))
    for b, sign in enumerate(geom.beam_signs):
        d = geom.beam_direction(sign)
        for ci, mask in enumerate(cells[b]):
            pts = np.column_stack([xx[mask], yy[mask]])
            vel = velocity_field.evaluate(pts, time)
            projected[b, ci] = float(np.mean(vel @ d))
    shifts = doppler_shift(projected, geom.tilt, grid.c, geom.carrier_hz)
    m_plus, m_minus = projected.mean(axis=1)
    u_x = (m_plus - m_minus) / (2.0 * math.sin(geom.tilt))
    u_y = -(m_plus + m_minus) / (2.0 * math.cos(geom.tilt))
    return VadcpReading(
        projected=projected,
        shifts=shifts,
        aggregate=np.array([u_x, u_y]),
        geometry=geom,
    )


def measurement_region(geom: BeamGeometry, grid: Grid) -> np.ndarray:
    """Union of all beam-cell masks: where the instrument actually looks."""
    cells = build_cells(geom, grid)
    region = np.zeros(grid.shape, dtype=bool)
    for beam_masks in cells:
        for mask in beam_masks:
            region |= mask
    return region


def compare_methods(
    velocity_field,
    inverse_estimate: FlowEstimate,
    geom: BeamGeometry,
    grid: Grid,
    region: np.ndarray | None = None,
    time: float = 0.0,
) -> dict:
    """Compare the instrument and the inverse pipeline on one flow field.

    Both produce a spatial-average velocity vector which is judged
    against the exact average of the true field over the region (by
    default the union of the beam cells, the area the instrument claims
    to measure).  Relative errors are Euclidean.
    """
    if region is None:
        region = measurement_region(geom, grid)
    region = np.asarray(region, dtype=bool)
    if region.shape != grid.shape:
        raise ValueError("region does not match the grid")
    if not region.any():
        raise ValueError("region is empty")

    xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
    pts = np.column_stack([xx[region], yy[region]])
    exact_avg = velocity_field.evaluate(pts, time).mean(axis=0)
    scale = float(np.linalg.norm(exact_avg))
    if scale == 0.0:
        raise ValueError("true field averages to zero over the region")

    reading = vadcp_measure(velocity_field, geom, grid, time)

    if inverse_estimate.is_dense:
        if inverse_estimate.u.shape != grid.shape:
            raise ValueError("dense estimate does not match the grid")
        inverse_avg = inverse_estimate.mean_velocity(region)
    else:
        ix = np.clip((inverse_estimate.points[:, 0] / grid.dx).astype(int), 0, grid.nx - 1)
        iy = np.clip((inverse_estimate.points[:, 1] / grid.dy).astype(int), 0, grid.ny - 1)
        keep = region[iy, ix]
        if not keep.any():
            raise ValueError("no sparse estimate points fall in the region")
        inverse_avg = inverse_estimate.velocities[keep].mean(axis=0)

    return {
        "exact_avg": [float(exact_avg[0]), float(exact_avg[1])],
        "vadcp_avg": [float(reading.aggregate[0]), float(reading.aggregate[1])],
        "inverse_avg": [float(inverse_avg[0]), float(inverse_avg[1])],
        "vadcp_rel_err": float(np.linalg.norm(reading.aggregate - exact_avg) / scale),
        "inverse_rel_err": float(np.linalg.norm(inverse_avg - exact_avg) / scale),
    }


def save_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def cells_to_png(geom: BeamGeometry, grid: Grid, path) -> Path:
    """Raster overlay of the beam cells: alternating shades per range cell."""
    from PIL import Image

    cells = build_cells(geom, grid)
    img = np.zeros(grid.shape, dtype=np.uint8)
    for beam_masks in cells:
        for ci, mask in enumerate(beam_masks):
            img[mask] = 120 if ci % 2 == 0 else 220
    path = Path(path)
    Image.fromarray(img[::-1], mode="L").save(path)
    return path
