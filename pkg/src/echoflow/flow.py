"""Synthetic flow fields, particle advection and frame bookkeeping.

Velocity fields come in three kinds: the analytic cellular vortex field
(divergence-free), a uniform field, and a field sampled on a regular grid
that is interpolated bilinearly in space (and linearly in time when more
than one snapshot is stored).  Particle trajectories follow the field by
forward Euler steps; particles that leave the domain are frozen at their
last inside position and flagged rather than dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FIELD_KINDS = ("taylor_green", "uniform", "sampled")


def eval_taylor_green(points, l1: float, l2: float) -> np.ndarray:
    """Cellular vortex velocity at points (n, 2) on [0, l1] x [0, l2].

    r(x) = (cos(2 pi x1 / l1) sin(2 pi x2 / l2),
            -sin(2 pi x1 / l1) cos(2 pi x2 / l2)), divergence-free.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = 2.0 * math.pi * pts[:, 0] / l1
    b = 2.0 * math.pi * pts[:, 1] / l2
    return np.column_stack([np.cos(a) * np.sin(b), -np.sin(a) * np.cos(b)])


@dataclass
class VelocityField:
    """A 2D velocity field over [0, lx] x [0, ly], optionally time-dependent."""

    kind: str
    lx: float
    ly: float
    amplitude: float = 1.0
    uniform_value: tuple[float, float] | None = None
    samples: np.ndarray | None = None  # (nt, ny, nx, 2) at cell centers
    frame_dt: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown velocity field kind {self.kind!r}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("field extents must be positive")
        if self.kind == "uniform" and self.uniform_value is None:
            raise ValueError("uniform field needs its value")
        if self.kind == "sampled":
            if self.samples is None:
                raise ValueError("sampled field needs a samples array")
            self.samples = np.asarray(self.samples, dtype=np.float64)
            if self.samples.ndim != 4 or self.samples.shape[-1] != 2:
                raise ValueError("samples must have shape (nt, ny, nx, 2)")
            if not np.isfinite(self.samples).all():
                raise ValueError("sampled velocities contain non-finite entries")
            if self.samples.shape[0] > 1 and self.frame_dt is None:
                raise ValueError("time-dependent samples need frame_dt")

    @classmethod
    def taylor_green(cls, lx: float, ly: float, amplitude: float = 1.0) -> "VelocityField":
        return cls(kind="taylor_green", lx=lx, ly=ly, amplitude=amplitude)

    @classmethod
    def uniform(cls, value: tuple[float, float], lx: float, ly: float) -> "VelocityField":
        return cls(kind="uniform", lx=lx, ly=ly, uniform_value=(float(value[0]), float(value[1])))

    @classmethod
    def sampled(
        cls, samples: np.ndarray, lx: float, ly: float, frame_dt: float | None = None
    ) -> "VelocityField":
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 3:
            samples = samples[None]
        return cls(kind="sampled", lx=lx, ly=ly, samples=samples, frame_dt=frame_dt)

    @property
    def time_dependent(self) -> bool:
        return self.kind == "sampled" and self.samples.shape[0] > 1

    def evaluate(self, points, t: float = 0.0) -> np.ndarray:
        """Velocity vectors (n, 2) at points (n, 2) and time t."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "taylor_green":
            return self.amplitude * eval_taylor_green(pts, self.lx, self.ly)
        if self.kind == "uniform":
            return np.broadcast_to(np.asarray(self.uniform_value), (pts.shape[0], 2)).copy()
        return self._evaluate_sampled(pts, t)

    def _evaluate_sampled(self, pts: np.ndarray, t: float) -> np.ndarray:
        nt = self.samples.shape[0]
        if nt == 1:
            return self._bilinear(self.samples[0], pts)
        # clamp-linear interpolation between stored snapshots
        s = min(max(t / self.frame_dt, 0.0), nt - 1.0)
        k0 = int(math.floor(s))
        k1 = min(k0 + 1, nt - 1)
        w = s - k0
        v0 = self._bilinear(self.samples[k0], pts)
        if k1 == k0 or w == 0.0:
            return v0
        return (1.0 - w) * v0 + w * self._bilinear(self.samples[k1], pts)

    def _bilinear(self, snap: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation between cell-center nodes, clamped at edges."""
        ny, nx = snap.shape[:2]
        dx = self.lx / nx
        dy = self.ly / ny
        gx = np.clip(pts[:, 0] / dx - 0.5, 0.0, nx - 1.0)
        gy = np.clip(pts[:, 1] / dy - 0.5, 0.0, ny - 1.0)
        i0 = np.clip(np.floor(gx).astype(int), 0, nx - 2) if nx > 1 else np.zeros(len(pts), int)
        j0 = np.clip(np.floor(gy).astype(int), 0, ny - 2) if ny > 1 else np.zeros(len(pts), int)
        i1 = np.minimum(i0 + 1, nx - 1)
        j1 = np.minimum(j0 + 1, ny - 1)
        fx = (gx - i0)[:, None]
        fy = (gy - j0)[:, None]
        return (
            snap[j0, i0] * (1 - fx) * (1 - fy)
            + snap[j0, i1] * fx * (1 - fy)
            + snap[j1, i0] * (1 - fx) * fy
            + snap[j1, i1] * fx * fy
        )


@dataclass
class ParticleSet:
    """Particle centers at one instant."""

    centers: np.ndarray  # (n, 2), meters
    diameter: float
    time: float = 0.0

    def __post_init__(self) -> None:
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        if self.diameter <= 0:
            raise ValueError("particle diameter must be positive")


@dataclass
class TrajectorySet:
    """Euler-advected particle paths on a fixed time step.

    positions[k, i] is particle i at time k * dt; active[k, i] is False
    once the particle has left the domain (it keeps its last position).
    """

    positions: np.ndarray  # (steps + 1, n, 2)
    dt: float
    diameter: float
    active: np.ndarray  # (steps + 1, n) bool

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float)
        self.active = np.asarray(self.active, dtype=bool)
        if self.positions.ndim != 3 or self.positions.shape[-1] != 2:
            raise ValueError("positions must have shape (steps + 1, n, 2)")
        if self.active.shape != self.positions.shape[:2]:
            raise ValueError("active mask must match positions")
        if self.dt <= 0 or self.diameter <= 0:
            raise ValueError("dt and diameter must be positive")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    @property
    def duration(self) -> float:
        return (self.positions.shape[0] - 1) * self.dt

    def positions_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Linear interpolation of paths at time t, with the active mask.

        A particle counts as active at t only if it is active at both
        bracketing nodes.
        """
        last = self.positions.shape[0] - 1
        s = t / self.dt
        if s < -1e-9 or s > last + 1e-9:
            raise ValueError(f"time {t} outside the trajectory span")
        s = min(max(s, 0.0), float(last))
        k0 = int(math.floor(s))
        k1 = min(k0 + 1, last)
        w = s - k0
        pos = (1.0 - w) * self.positions[k0] + w * self.positions[k1]
        act = self.active[k0] & self.active[k1]
        return pos, act


def advect(
    initial_positions,
    velocity_field: VelocityField,
    dt: float,
    steps: int,
    diameter: float = 0.01,
) -> TrajectorySet:
    """Forward Euler advection: x_{k+1} = x_k + dt * v(x_k, t_k).

    Particles leaving [0, lx] x [0, ly] freeze at their last inside
    position and are flagged inactive from that step on.
    """
    x0 = np.asarray(initial_positions, dtype=float).reshape(-1, 2)
    if dt <= 0:
        raise ValueError("advection dt must be positive")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if not _inside(x0, velocity_field.lx, velocity_field.ly).all():
        raise ValueError("initial particle positions must lie inside the domain")
    n = x0.shape[0]
    pos = np.zeros((steps + 1, n, 2))
    act = np.ones((steps + 1, n), dtype=bool)
    pos[0] = x0
    for k in range(steps):
        v = velocity_field.evaluate(pos[k], k * dt)
        nxt = pos[k] + dt * v
        ok = _inside(nxt, velocity_field.lx, velocity_field.ly) & act[k]
        pos[k + 1] = np.where(ok[:, None], nxt, pos[k])
        act[k + 1] = ok
    return TrajectorySet(pos, dt, diameter, act)


def _inside(pts: np.ndarray, lx: float, ly: float) -> np.ndarray:
    return (
        (pts[:, 0] >= 0.0) & (pts[:, 0] <= lx) & (pts[:, 1] >= 0.0) & (pts[:, 1] <= ly)
    )


def frame_positions(trajectory: TrajectorySet, frame_period: float) -> list[ParticleSet]:
    """Particle sets at t = 0, dT, 2 dT, ... within the trajectory span.

    The frame period must be a whole multiple of the advection step (to a
    relative tolerance of 1e-9); only active particles are included.
    """
    if frame_period <= 0:
        raise ValueError("frame period must be positive")
    ratio = frame_period / trajectory.dt
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ValueError(
            f"frame period {frame_period} is not a multiple of the advection "
            f"step {trajectory.dt}"
        )
    stride = int(round(ratio))
    if stride == 0:
        raise ValueError("frame period is smaller than the advection step")
    count = (trajectory.positions.shape[0] - 1) // stride + 1
    out = []
    for j in range(count):
        k = j * stride
        keep = trajectory.active[k]
        out.append(
            ParticleSet(
                centers=trajectory.positions[k][keep],
                diameter=trajectory.diameter,
                time=k * trajectory.dt,
            )
        )
    return out


def save_trajectory_csv(trajectory: TrajectorySet, path) -> Path:
    """Write active trajectory nodes as CSV rows (frame, particle_id, x, y)."""
    path = Path(path)
    lines = ["frame,particle_id,x,y"]
    for k in range(trajectory.positions.shape[0]):
        for i in range(trajectory.n_particles):
            if trajectory.active[k, i]:
                x, y = trajectory.positions[k, i]
                lines.append(f"{k},{i},{x:.17g},{y:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# sampled-field file format: JSON header + raw little-endian float64 payload
# laid out [time][y][x][component]


def save_velocity_field(field: VelocityField, base_path) -> Path:
    base = Path(base_path)
    if base.suffix in (".f64", ".json"):
        base = base.with_suffix("")
    if field.kind != "sampled":
        raise ValueError("only sampled fields can be written to file")
    nt, ny, nx = field.samples.shape[:3]
    header = {
        "nx": nx,
        "ny": ny,
        "lx": field.lx,
        "ly": field.ly,
        "components": 2,
        "time_steps": nt,
    }
    if field.frame_dt is not None:
        header["frame_dt"] = field.frame_dt
    base.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")
    payload = np.ascontiguousarray(field.samples, dtype="<f8")
    raw = base.with_suffix(".f64")
    raw.write_bytes(payload.tobytes())
    return raw


def load_velocity_field(base_path) -> VelocityField:
    base = Path(base_path)
    if base.suffix in (".f64", ".json"):
        base = base.with_suffix("")
    header = json.loads(base.with_suffix(".json").read_text())
    if int(header.get("components", 2)) != 2:
        raise ValueError("velocity field file must hold 2 components")
    nt = int(header["time_steps"])
    ny, nx = int(header["ny"]), int(header["nx"])
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    if raw.size != nt * ny * nx * 2:
        raise ValueError(
            f"velocity payload holds {raw.size} values, header implies "
            f"{nt * ny * nx * 2}"
        )
    samples = raw.reshape(nt, ny, nx, 2).astype(np.float64)
    return VelocityField.sampled(
        samples, float(header["lx"]), float(header["ly"]),
        frame_dt=header.get("frame_dt"),
    )


def vortex_street(
    lx: float,
    ly: float,
    nx: int,
    ny: int,
    mean_speed: float = 1.0,
    vortex_strength: float = 0.3,
    n_pairs: int = 3,
    core_radius: float | None = None,
    x_start: float | None = None,
) -> VelocityField:
    """Kinematic vortex-street model sampled on a regular grid.

    A uniform stream plus two staggered rows of counter-rotating Gaussian
    vortices, the classic wake pattern behind a bluff body.  Strengths are
    relative to ``mean_speed``; the result is a single-snapshot sampled
    field suitable for the import path.
    """
    if core_radius is None:
        core_radius = 0.12 * ly
    if x_start is None:
        x_start = 0.25 * lx
    xs = (np.arange(nx) + 0.5) * (lx / nx)
    ys = (np.arange(ny) + 0.5) * (ly / ny)
    X, Y = np.meshgrid(xs, ys)
    U = np.full_like(X, float(mean_speed))
    V = np.zeros_like(Y)
    spacing = (lx - x_start) / max(1, n_pairs)
    peak = vortex_strength * mean_speed
    for k in range(2 * n_pairs):
        cx = x_start + (k / 2.0) * spacing
        upper = k % 2 == 0
        cy = ly * (0.62 if upper else 0.38)
        sign = 1.0 if upper else -1.0
        dx = X - cx
        dy = Y - cy
        r2 = (dx**2 + dy**2) / core_radius**2
        swirl = sign * peak * np.exp(0.5 * (1.0 - r2))  # Gaussian vortex, peak at core edge
        U += -swirl * dy / core_radius
        V += swirl * dx / core_radius
    samples = np.stack([U, V], axis=-1)[None]
    return VelocityField.sampled(samples, lx, ly)
