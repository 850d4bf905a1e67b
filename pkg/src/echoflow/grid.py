"""Uniform 2D grids, particle rasterization and field serialization.

The physical domain [0, lx] x [0, ly] is covered by nx x ny rectangular
cells; field values live at cell centers ((i + 0.5) dx, (j + 0.5) dy) and
are stored in (ny, nx) arrays indexed [j, i].  The absorbing layer used by
the wave solver sits outside this domain, so grid coordinates, receiver
positions and norms never touch it.

Discrete norms are scaled so they approximate their continuous
counterparts: sqrt(sum(f^2) * dx * dy) for fields, sqrt(sum(u^2) * dt)
for receiver traces.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LAYOUT_TAGS = ("top", "top_bottom", "all_around", "lateral", "custom")


def cfl_timestep(spacing: tuple[float, float], c: float, safety: float = 0.9) -> float:
    """Largest stable timestep for the 2D leapfrog scheme, times ``safety``.

    Stability requires c * dt * sqrt(1/dx^2 + 1/dy^2) <= 1.
    """
    dx, dy = spacing
    if dx <= 0 or dy <= 0:
        raise ValueError("grid spacing must be positive")
    if c <= 0:
        raise ValueError("wave speed must be positive")
    if not 0 < safety <= 1:
        raise ValueError(f"CFL safety factor must be in (0, 1], got {safety}")
    return safety / (c * math.sqrt(1.0 / dx**2 + 1.0 / dy**2))


@dataclass(frozen=True)
class GridConfig:
    """Parameters from which a Grid is built.

    Exactly one of ``nt`` or ``duration`` fixes the number of timesteps.
    If ``dt`` is omitted it is derived from the CFL bound.
    """

    nx: int
    ny: int
    lx: float
    ly: float
    c: float
    nt: int | None = None
    duration: float | None = None
    dt: float | None = None
    pml_width: int = 20
    cfl_safety: float = 0.9


@dataclass(frozen=True)
class Grid:
    """Immutable uniform grid with a fixed timestep and step count."""

    nx: int
    ny: int
    dx: float
    dy: float
    c: float
    dt: float
    nt: int
    pml_width: int = 20

    def __post_init__(self) -> None:
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid needs at least 4 cells per direction")
        if min(self.dx, self.dy, self.c, self.dt) <= 0:
            raise ValueError("dx, dy, c, dt must all be positive")
        if self.nt < 1:
            raise ValueError("nt must be at least 1")
        if self.pml_width < 0:
            raise ValueError("pml_width must be nonnegative")
        if self.cfl_number > 1.0 + 1e-12:
            raise ValueError(
                f"CFL violation: c*dt*sqrt(1/dx^2+1/dy^2) = {self.cfl_number:.6f} > 1"
            )

    @property
    def lx(self) -> float:
        return self.nx * self.dx

    @property
    def ly(self) -> float:
        return self.ny * self.dy

    @property
    def cfl_number(self) -> float:
        return self.c * self.dt * math.sqrt(1.0 / self.dx**2 + 1.0 / self.dy**2)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def duration(self) -> float:
        return self.nt * self.dt

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        """(ny, nx), the shape of field arrays on this grid."""
        return (self.ny, self.nx)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points (n, 2) lying inside the physical domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (pts[:, 0] >= 0.0)
            & (pts[:, 0] <= self.lx)
            & (pts[:, 1] >= 0.0)
            & (pts[:, 1] <= self.ly)
        )


def build_grid(config: GridConfig) -> Grid:
    """Construct a validated Grid from a GridConfig."""
    dx = config.lx / config.nx
    dy = config.ly / config.ny
    dt_max = cfl_timestep((dx, dy), config.c, 1.0)
    if config.dt is not None:
        dt = config.dt
        if dt > dt_max * (1.0 + 1e-12):
            raise ValueError(
                f"explicit dt {dt:.3e} violates the CFL bound {dt_max:.3e}"
            )
    else:
        dt = cfl_timestep((dx, dy), config.c, config.cfl_safety)
    if config.nt is not None and config.duration is not None:
        raise ValueError("give either nt or duration, not both")
    if config.nt is not None:
        nt = config.nt
    elif config.duration is not None:
        nt = max(1, math.ceil(config.duration / dt))
    else:
        raise ValueError("either nt or duration is required")
    return Grid(
        nx=config.nx,
        ny=config.ny,
        dx=dx,
        dy=dy,
        c=config.c,
        dt=dt,
        nt=nt,
        pml_width=config.pml_width,
    )


@dataclass
class DensityField:
    """Scalar field on a Grid, stored as a (ny, nx) float array."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid) -> "DensityField":
        return cls(grid, np.zeros(grid.shape))

    def copy(self) -> "DensityField":
        return DensityField(self.grid, self.values.copy())

    def norm(self) -> float:
        """Discrete L2 norm, scaled by cell area."""
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_area))


@dataclass(frozen=True)
class ReceiverLayout:
    """Receiver cells on the grid, given as (ix, iy) cell indices."""

    positions: tuple[tuple[int, int], ...]
    tag: str = "custom"

    def __post_init__(self) -> None:
        if self.tag not in LAYOUT_TAGS:
            raise ValueError(f"unknown layout tag {self.tag!r}")
        if len(self.positions) == 0:
            raise ValueError("layout needs at least one receiver")
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("receiver positions must be distinct")

    def __len__(self) -> int:
        return len(self.positions)

    def coordinates(self, grid: Grid) -> np.ndarray:
        """Physical (x, y) coordinates of the receiver cell centers, (n, 2)."""
        idx = np.asarray(self.positions, dtype=int)
        return np.column_stack(
            [(idx[:, 0] + 0.5) * grid.dx, (idx[:, 1] + 0.5) * grid.dy]
        )


def _edge_indices(n: int, count: int) -> np.ndarray:
    """``count`` distinct cell indices spread evenly over range(n)."""
    if count > n:
        raise ValueError(f"cannot place {count} receivers on an edge of {n} cells")
    idx = np.unique(np.round(np.linspace(0, n - 1, count)).astype(int))
    # rounding can merge neighbors on coarse edges; pad from the unused cells
    if len(idx) < count:
        free = np.setdiff1d(np.arange(n), idx)
        idx = np.sort(np.concatenate([idx, free[: count - len(idx)]]))
    return idx


def make_layout(
    grid: Grid,
    tag: str,
    per_horizontal: int = 32,
    per_vertical: int = 16,
    positions: list[tuple[int, int]] | None = None,
) -> ReceiverLayout:
    """Build one of the named receiver layouts on the boundary of the domain.

    Horizontal edges (top y = ly, bottom y = 0) carry ``per_horizontal``
    receivers each, vertical edges ``per_vertical``.
    """
    if tag == "custom":
        if not positions:
            raise ValueError("custom layout requires explicit positions")
        pos = [(int(ix), int(iy)) for ix, iy in positions]
        for ix, iy in pos:
            if not (0 <= ix < grid.nx and 0 <= iy < grid.ny):
                raise ValueError(f"receiver ({ix}, {iy}) is outside the grid")
        return ReceiverLayout(tuple(pos), tag="custom")

    top = [(int(ix), grid.ny - 1) for ix in _edge_indices(grid.nx, per_horizontal)]
    bottom = [(int(ix), 0) for ix in _edge_indices(grid.nx, per_horizontal)]
    # vertical edges skip the corner rows so edges never share a cell
    left = [(0, int(iy) + 1) for iy in _edge_indices(grid.ny - 2, per_vertical)]
    right = [(grid.nx - 1, int(iy) + 1) for iy in _edge_indices(grid.ny - 2, per_vertical)]

    if tag == "top":
        pos = top
    elif tag == "top_bottom":
        pos = top + bottom
    elif tag == "lateral":
        pos = left + right
    elif tag == "all_around":
        pos = top + bottom + left + right
    else:
        raise ValueError(f"unknown layout tag {tag!r}")
    return ReceiverLayout(tuple(pos), tag=tag)


@dataclass
class ReceiverData:
    """Recorded traces: samples[r, k] is receiver r at time (k + 1) * dt."""

    samples: np.ndarray
    dt: float
    layout: ReceiverLayout | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a (receivers, nt) matrix")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.layout is not None and len(self.layout) != self.samples.shape[0]:
            raise ValueError(
                f"layout has {len(self.layout)} receivers, samples have "
                f"{self.samples.shape[0]} rows"
            )

    @property
    def n_receivers(self) -> int:
        return self.samples.shape[0]

    @property
    def nt(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.nt) + 1) * self.dt

    def norm(self) -> float:
        """Discrete L2 norm over receivers x time, scaled by dt."""
        return float(np.sqrt(np.sum(self.samples**2) * self.dt))

    def copy(self) -> "ReceiverData":
        return ReceiverData(self.samples.copy(), self.dt, self.layout)


def rasterize_particles(
    centers, diameter: float, grid: Grid, counts: np.ndarray | None = None
) -> DensityField:
    """Indicator-sum density of disk particles on the grid.

    A cell belongs to a particle when its center lies inside the closed
    disk, 2 * |x_cell - center| <= diameter.  Overlapping disks add, so
    the result is the superposition of single-particle fields.
    """
    pts = np.asarray(centers, dtype=float).reshape(-1, 2)
    if diameter <= 0:
        raise ValueError("particle diameter must be positive")
    inside = grid.contains(pts)
    if not np.all(inside):
        bad = np.flatnonzero(~inside)
        raise ValueError(f"particle centers {bad.tolist()} are outside the domain")

    r = diameter / 2.0
    poking = (
        (pts[:, 0] < r)
        | (pts[:, 0] > grid.lx - r)
        | (pts[:, 1] < r)
        | (pts[:, 1] > grid.ly - r)
    )
    if np.any(poking):
        warnings.warn(
            f"{int(np.sum(poking))} particle disk(s) extend past the domain edge "
            "into the absorbing layer",
            stacklevel=2,
        )

    values = np.zeros(grid.shape)
    xs, ys = grid.x_centers, grid.y_centers
    for cx, cy in pts:
        i0 = max(0, int((cx - r) / grid.dx - 1))
        i1 = min(grid.nx, int((cx + r) / grid.dx + 2))
        j0 = max(0, int((cy - r) / grid.dy - 1))
        j1 = min(grid.ny, int((cy + r) / grid.dy + 2))
        if i0 >= i1 or j0 >= j1:
            continue
        dx2 = (xs[i0:i1] - cx) ** 2
        dy2 = (ys[j0:j1] - cy) ** 2
        values[j0:j1, i0:i1] += (dy2[:, None] + dx2[None, :]) <= r * r
    field = DensityField(grid, values)
    if counts is not None:
        counts[:] = values
    return field


def relative_l2_error(estimate, reference) -> float:
    """||estimate - reference||_2 / ||reference||_2 over flattened values."""
    a = _raw_values(estimate)
    b = _raw_values(reference)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    ref_norm = float(np.linalg.norm(b))
    if ref_norm == 0.0:
        raise ValueError("reference has zero norm, relative error undefined")
    return float(np.linalg.norm(a - b) / ref_norm)


def _raw_values(obj) -> np.ndarray:
    if isinstance(obj, DensityField):
        return obj.values.ravel()
    if isinstance(obj, ReceiverData):
        return obj.samples.ravel()
    return np.asarray(obj, dtype=float).ravel()


# ---------------------------------------------------------------------------
# serialization: raw little-endian float64 payload plus a JSON sidecar


def _sidecar_paths(base_path) -> tuple[Path, Path]:
    base = Path(base_path)
    if base.suffix in (".f64", ".json"):
        base = base.with_suffix("")
    return base.with_suffix(".f64"), base.with_suffix(".json")


def save_field(field: DensityField, base_path, kind: str = "density") -> Path:
    """Write values as raw row-major '<f8' plus a JSON header, return raw path."""
    raw_path, json_path = _sidecar_paths(base_path)
    payload = np.ascontiguousarray(field.values, dtype="<f8")
    raw_path.write_bytes(payload.tobytes())
    header = {
        "kind": kind,
        "nx": field.grid.nx,
        "ny": field.grid.ny,
        "dx": field.grid.dx,
        "dy": field.grid.dy,
    }
    json_path.write_text(json.dumps(header, indent=2) + "\n")
    return raw_path


def load_field(base_path) -> tuple[np.ndarray, dict]:
    """Read a raw field written by save_field, return (values, header)."""
    raw_path, json_path = _sidecar_paths(base_path)
    header = json.loads(json_path.read_text())
    values = np.frombuffer(raw_path.read_bytes(), dtype="<f8").astype(np.float64)
    ny, nx = int(header["ny"]), int(header["nx"])
    if values.size != nx * ny:
        raise ValueError(
            f"raw payload holds {values.size} values, header says {nx * ny}"
        )
    return values.reshape(ny, nx), header


def save_receiver_csv(data: ReceiverData, path) -> Path:
    """CSV with column 0 = time in seconds, one column per receiver."""
    path = Path(path)
    table = np.column_stack([data.times, data.samples.T])
    cols = ",".join(["time_s"] + [f"receiver_{i}" for i in range(data.n_receivers)])
    np.savetxt(path, table, delimiter=",", header=cols, comments="", fmt="%.17g")
    return path


def load_receiver_csv(path) -> ReceiverData:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = table[:, 0]
    samples = table[:, 1:].T
    if len(times) < 1:
        raise ValueError("receiver CSV holds no samples")
    dt = times[0] if len(times) == 1 else float(times[1] - times[0])
    return ReceiverData(samples, dt)


def save_receiver_raw(data: ReceiverData, base_path) -> Path:
    raw_path, json_path = _sidecar_paths(base_path)
    payload = np.ascontiguousarray(data.samples, dtype="<f8")
    raw_path.write_bytes(payload.tobytes())
    header = {
        "kind": "receiver_data",
        "n_receivers": data.n_receivers,
        "nt": data.nt,
        "dt": data.dt,
    }
    json_path.write_text(json.dumps(header, indent=2) + "\n")
    return raw_path


def load_receiver_raw(base_path) -> ReceiverData:
    raw_path, json_path = _sidecar_paths(base_path)
    header = json.loads(json_path.read_text())
    values = np.frombuffer(raw_path.read_bytes(), dtype="<f8").astype(np.float64)
    n, nt = int(header["n_receivers"]), int(header["nt"])
    if values.size != n * nt:
        raise ValueError("raw receiver payload does not match its header")
    return ReceiverData(values.reshape(n, nt), float(header["dt"]))


def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def grid_to_dict(grid: Grid) -> dict:
    return dataclasses.asdict(grid)
