"""2D acoustic wave propagation with an absorbing boundary layer.

Solves (1/c^2) u_tt - lap(u) = s(x, t) with a second-order centered
leapfrog on a grid padded by a split-field absorbing layer (damping
profiles sigma_x, sigma_y plus auxiliary fields phi, psi):

    u_tt + (sx + sy) u_t + sx sy u = c^2 (lap(u) + phi_x + psi_y) + c^2 s
    phi_t = -sx phi + (sy - sx) u_x
    psi_t = -sy psi + (sx - sy) u_y

The discrete update is linear in the state, so one timestep is a matrix
A acting on (u, u_prev, phi, psi).  ``_Kernels`` implements A and its
exact transpose A^T as paired array kernels; the map from a source
density to its receiver traces and the reverse-time accumulation built
from A^T are then exact matrix transposes of each other, which the
reconstruction module relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from echoflow.grid import (
    DensityField,
    Grid,
    ReceiverData,
    ReceiverLayout,
    rasterize_particles,
)

SIGNAL_KINDS = ("gaussian_pulse", "plane_wave")


@dataclass(frozen=True)
class SourceSignal:
    """Time modulation of the scattering sources.

    A ``gaussian_pulse`` is space-independent:

        lam(t) = amplitude * exp(-pi^2 q0^2 (t - p/2)^2),  0 <= t <= p,

    zero outside, with support p = 6 / (pi q0).  A ``plane_wave`` applies
    the same pulse with a travelling delay: the front crosses the point x
    at time (onset + dir . x) / c, and the onset >= 1 guarantees the
    profile vanishes for c t - dir . x < 1.
    """

    kind: str
    q0: float
    amplitude: float = 1.0
    direction: tuple[float, float] | None = None
    onset: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.q0 <= 0:
            raise ValueError("central frequency q0 must be positive")
        if self.kind == "plane_wave":
            if self.direction is None or self.onset is None:
                raise ValueError("plane_wave needs a direction and an onset")
            dn = math.hypot(*self.direction)
            if abs(dn - 1.0) > 1e-9:
                raise ValueError("plane-wave direction must be a unit vector")
            if self.onset < 1.0:
                raise ValueError("plane-wave onset must be at least 1")

    @classmethod
    def gaussian_pulse(cls, q0: float, amplitude: float = 1.0) -> "SourceSignal":
        return cls(kind="gaussian_pulse", q0=q0, amplitude=amplitude)

    @classmethod
    def plane_wave(
        cls,
        q0: float,
        direction: tuple[float, float],
        onset: float | None = None,
        extent: tuple[float, float] | None = None,
        amplitude: float = 1.0,
    ) -> "SourceSignal":
        """Plane-wave signal; with ``extent`` the onset is pushed out far
        enough that the profile is zero on [0, lx] x [0, ly] at t <= 0."""
        dn = math.hypot(*direction)
        if dn == 0:
            raise ValueError("direction must be nonzero")
        d = (direction[0] / dn, direction[1] / dn)
        if onset is None:
            onset = 1.0
        if extent is not None:
            lx, ly = extent
            corners = [(0.0, 0.0), (lx, 0.0), (0.0, ly), (lx, ly)]
            reach = -min(d[0] * x + d[1] * y for x, y in corners)
            onset = max(onset, reach + 1e-9)
        return cls(kind="plane_wave", q0=q0, amplitude=amplitude, direction=d, onset=onset)

    @property
    def support(self) -> float:
        """Temporal support p of the pulse at a fixed point."""
        return 6.0 / (math.pi * self.q0)

    def pulse(self, t):
        """The truncated Gaussian pulse, vectorized over t."""
        t = np.asarray(t, dtype=float)
        p = self.support
        out = self.amplitude * np.exp(-(math.pi**2) * self.q0**2 * (t - p / 2.0) ** 2)
        return np.where((t >= 0.0) & (t <= p), out, 0.0)


def eval_source(signal: SourceSignal, points, t, c: float | None = None):
    """Evaluate lam(x, t) at points (n, 2).

    Returns an array of shape t.shape + (n,).  Plane waves need the sound
    speed ``c`` to convert the travelling front's position into a delay.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.asarray(t, dtype=float)
    if signal.kind == "gaussian_pulse":
        vals = np.asarray(signal.pulse(t))
        return np.broadcast_to(vals[..., None], vals.shape + (pts.shape[0],)).copy()
    if c is None or c <= 0:
        raise ValueError("plane-wave evaluation needs the sound speed c")
    dxu, dyu = signal.direction
    delay = (signal.onset + dxu * pts[:, 0] + dyu * pts[:, 1]) / c
    return signal.pulse(t[..., None] - delay)


class _Kernels:
    """Padded-by-absorber coefficient arrays and the paired step kernels.

    The padded array is (ny + 2P, nx + 2P) with P = pml_width + 1; the
    outermost ring is a zero Dirichlet wall, the next ``pml_width`` cells
    are the graded absorber, and the interior block is the physical domain.
    """

    PROFILE_ORDER = 3
    TARGET_REFLECTION = 1e-7

    def __init__(self, grid: Grid):
        self.grid = grid
        W = grid.pml_width
        P = self.pad = W + 1
        self.nyp = grid.ny + 2 * P
        self.nxp = grid.nx + 2 * P
        self.interior = (slice(P, P + grid.ny), slice(P, P + grid.nx))

        dt, c = grid.dt, grid.c
        self.wx = 1.0 / grid.dx**2
        self.wy = 1.0 / grid.dy**2
        self.cdx = 1.0 / (2.0 * grid.dx)
        self.cdy = 1.0 / (2.0 * grid.dy)

        sx = self._profile(self.nxp, grid.dx)
        sy = self._profile(self.nyp, grid.dy)
        SX, SY = np.meshgrid(sx, sy)  # (nyp, nxp)

        denom = 1.0 + 0.5 * dt * (SX + SY)
        self.cu = (2.0 - dt**2 * SX * SY) / denom
        self.cp = (0.5 * dt * (SX + SY) - 1.0) / denom
        self.cl = (c**2 * dt**2) / denom
        self.ax = 1.0 - dt * SX
        self.bx = dt * (SY - SX)
        self.ay = 1.0 - dt * SY
        self.by = dt * (SX - SY)
        self.cl_interior = self.cl[self.interior]

    def _profile(self, n_padded: int, spacing: float) -> np.ndarray:
        """Polynomial damping profile along one axis of the padded grid."""
        W = self.grid.pml_width
        if W == 0:
            return np.zeros(n_padded)
        m = self.PROFILE_ORDER
        s_max = (
            (m + 1)
            * self.grid.c
            * math.log(1.0 / self.TARGET_REFLECTION)
            / (2.0 * W * spacing)
        )
        # keep the corner recurrence comfortably inside its stability disc
        s_max = min(s_max, 1.5 / self.grid.dt)
        prof = np.zeros(n_padded)
        depth = (W + 0.5 - np.arange(self.pad)) / W  # ring first, then layer
        vals = s_max * np.clip(depth, 0.0, None) ** m
        prof[: self.pad] = vals
        prof[n_padded - self.pad :] = vals[::-1]
        return prof

    def alloc_state(self) -> list[np.ndarray]:
        return [np.zeros((self.nyp, self.nxp)) for _ in range(4)]

    # -- forward: one application of A (plus optional source injection) -----

    def forward_step(self, u, up, ph, ps, un, phn, psn, tmp) -> None:
        """(u, up, ph, ps) -> (un, u, phn, psn); tmp is scratch."""
        wx, wy, cdx, cdy = self.wx, self.wy, self.cdx, self.cdy
        tmp.fill(0.0)
        tmp[1:-1, 1:-1] = (
            (u[1:-1, 2:] + u[1:-1, :-2]) * wx
            + (u[2:, 1:-1] + u[:-2, 1:-1]) * wy
            - (2.0 * (wx + wy)) * u[1:-1, 1:-1]
            + (ph[1:-1, 2:] - ph[1:-1, :-2]) * cdx
            + (ps[2:, 1:-1] - ps[:-2, 1:-1]) * cdy
        )
        np.multiply(self.cu, u, out=un)
        un += self.cp * up
        un += self.cl * tmp

        phn.fill(0.0)
        phn[1:-1, 1:-1] = self.ax[1:-1, 1:-1] * ph[1:-1, 1:-1] + self.bx[1:-1, 1:-1] * (
            (u[1:-1, 2:] - u[1:-1, :-2]) * cdx
        )
        psn.fill(0.0)
        psn[1:-1, 1:-1] = self.ay[1:-1, 1:-1] * ps[1:-1, 1:-1] + self.by[1:-1, 1:-1] * (
            (u[2:, 1:-1] - u[:-2, 1:-1]) * cdy
        )

    # -- transpose: one application of A^T -----------------------------------

    def transpose_step(self, au, aup, aph, aps, nau, naph, naps, tmp) -> None:
        """Exact transpose of forward_step's linear map.

        Writes the new adjoint state into (nau, aup-slot, naph, naps); the
        caller rotates buffers the same way as in the forward direction.
        """
        wx, wy, cdx, cdy = self.wx, self.wy, self.cdx, self.cdy
        np.multiply(self.cl, au, out=tmp)
        ti = tmp[1:-1, 1:-1]

        np.multiply(self.cu, au, out=nau)
        nau += aup
        # scatter-transpose of the Laplacian acting on cl*au
        nau[1:-1, 2:] += ti * wx
        nau[1:-1, :-2] += ti * wx
        nau[2:, 1:-1] += ti * wy
        nau[:-2, 1:-1] += ti * wy
        nau[1:-1, 1:-1] -= (2.0 * (wx + wy)) * ti
        # scatter-transpose of the aux-field couplings into u
        bphi = self.bx[1:-1, 1:-1] * aph[1:-1, 1:-1]
        nau[1:-1, 2:] += bphi * cdx
        nau[1:-1, :-2] -= bphi * cdx
        bpsi = self.by[1:-1, 1:-1] * aps[1:-1, 1:-1]
        nau[2:, 1:-1] += bpsi * cdy
        nau[:-2, 1:-1] -= bpsi * cdy

        np.multiply(self.cp, au, out=aup)  # new adjoint u_prev

        naph.fill(0.0)
        naph[1:-1, 1:-1] = self.ax[1:-1, 1:-1] * aph[1:-1, 1:-1]
        naph[1:-1, 2:] += ti * cdx
        naph[1:-1, :-2] -= ti * cdx

        naps.fill(0.0)
        naps[1:-1, 1:-1] = self.ay[1:-1, 1:-1] * aps[1:-1, 1:-1]
        naps[2:, 1:-1] += ti * cdy
        naps[:-2, 1:-1] -= ti * cdy


@lru_cache(maxsize=8)
def _kernels_for(grid: Grid) -> _Kernels:
    return _Kernels(grid)


@dataclass
class WaveState:
    """Wavefield snapshot on the padded grid after ``step_index`` steps."""

    u: np.ndarray
    u_prev: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    step_index: int = 0

    @classmethod
    def zeros(cls, grid: Grid) -> "WaveState":
        k = _kernels_for(grid)
        u, up, ph, ps = k.alloc_state()
        return cls(u, up, ph, ps, 0)

    def interior(self, grid: Grid) -> np.ndarray:
        return self.u[_kernels_for(grid).interior]


def step_wave(state: WaveState, source_term: np.ndarray | None, grid: Grid) -> WaveState:
    """Advance one leapfrog step; ``source_term`` is the PDE right-hand side
    lam(x, t_k) f(x) on the physical cells at the current step."""
    k = _kernels_for(grid)
    un = np.empty_like(state.u)
    phn = np.empty_like(state.phi)
    psn = np.empty_like(state.psi)
    tmp = np.empty_like(state.u)
    k.forward_step(state.u, state.u_prev, state.phi, state.psi, un, phn, psn, tmp)
    if source_term is not None:
        src = np.asarray(source_term, dtype=float)
        if src.shape != grid.shape:
            raise ValueError("source_term must match the grid shape")
        un[k.interior] += k.cl_interior * src
    if not math.isfinite(float(np.sum(un))):
        raise RuntimeError(f"wave field diverged at step {state.step_index + 1}")
    return WaveState(un, state.u, phn, psn, state.step_index + 1)


class WaveOperator:
    """Linear map from a source density to its receiver traces.

    ``forward`` runs the leapfrog with source lam(t_k) f and samples the
    receivers after every step; ``transpose`` is its exact matrix
    transpose, a reverse-time recursion that injects traces at the
    receiver cells and accumulates the lam-weighted wavefield.
    """

    def __init__(self, grid: Grid, signal: SourceSignal, layout: ReceiverLayout):
        self.grid = grid
        self.signal = signal
        self.layout = layout
        self.k = _kernels_for(grid)
        P = self.k.pad
        idx = np.asarray(layout.positions, dtype=int)
        self._rows = idx[:, 1] + P
        self._cols = idx[:, 0] + P
        times = np.arange(grid.nt) * grid.dt
        if signal.kind == "gaussian_pulse":
            self._lam = signal.pulse(times)
        else:
            # travelling plane wave: per-step source pattern over the domain
            dxu, dyu = signal.direction
            X, Y = np.meshgrid(grid.x_centers, grid.y_centers)
            self._delay = (signal.onset + dxu * X + dyu * Y) / grid.c
            self._lam = None
            self._times = times
        self._nrec = len(layout)

    def _lam_at(self, k: int) -> float | np.ndarray:
        if self._lam is not None:
            return float(self._lam[k])
        return self.signal.pulse(self._times[k] - self._delay)

    def forward(
        self, f_values: np.ndarray, snapshot_every: int | None = None
    ) -> np.ndarray | tuple[np.ndarray, list[np.ndarray]]:
        """Receiver samples (n_receivers, nt) for the source density f."""
        g = self.grid
        f = np.asarray(f_values, dtype=float)
        if f.shape != g.shape:
            raise ValueError(f"source density shape {f.shape} != grid {g.shape}")
        k = self.k
        u, up, ph, ps = k.alloc_state()
        un, phn, psn, tmp = k.alloc_state()
        finj = k.cl_interior * f
        scalar_lam = self._lam is not None
        samples = np.zeros((self._nrec, g.nt))
        snaps: list[np.ndarray] = []
        for step in range(g.nt):
            k.forward_step(u, up, ph, ps, un, phn, psn, tmp)
            if scalar_lam:
                lam = self._lam[step]
                if lam != 0.0:
                    un[k.interior] += lam * finj
            else:
                un[k.interior] += k.cl_interior * (self._lam_at(step) * f)
            samples[:, step] = un[self._rows, self._cols]
            if not math.isfinite(float(np.sum(samples[:, step]))) or (
                step % 32 == 31 and not math.isfinite(float(np.sum(un)))
            ):
                raise RuntimeError(f"wave field diverged at step {step + 1}")
            u, up, un = un, u, up
            ph, phn = phn, ph
            ps, psn = psn, ps
            if snapshot_every and (step + 1) % snapshot_every == 0:
                snaps.append(u[k.interior].copy())
        if not math.isfinite(float(np.sum(u))):
            raise RuntimeError(f"wave field diverged at step {g.nt}")
        if snapshot_every:
            return samples, snaps
        return samples

    def transpose(self, samples: np.ndarray) -> np.ndarray:
        """Exact transpose of ``forward``: traces back to a density image."""
        g = self.grid
        v = np.asarray(samples, dtype=float)
        if v.shape != (self._nrec, g.nt):
            raise ValueError(f"samples shape {v.shape} != ({self._nrec}, {g.nt})")
        k = self.k
        au, aup, aph, aps = k.alloc_state()
        nau, naph, naps, tmp = (
            np.empty((k.nyp, k.nxp)),
            np.empty((k.nyp, k.nxp)),
            np.empty((k.nyp, k.nxp)),
            np.empty((k.nyp, k.nxp)),
        )
        scalar_lam = self._lam is not None
        image = np.zeros(g.shape)
        for step in range(g.nt - 1, -1, -1):
            k.transpose_step(au, aup, aph, aps, nau, naph, naps, tmp)
            nau[self._rows, self._cols] += v[:, step]
            if scalar_lam:
                lam = self._lam[step]
                if lam != 0.0:
                    image += lam * (k.cl_interior * nau[k.interior])
            else:
                image += self._lam_at(step) * (k.cl_interior * nau[k.interior])
            au, nau = nau, au
            aph, naph = naph, aph
            aps, naps = naps, aps
        if not math.isfinite(float(np.sum(image))):
            raise RuntimeError("adjoint field diverged during reverse sweep")
        return image


def default_frame_duration(grid: Grid, signal: SourceSignal) -> float:
    """Pulse support plus one domain-diagonal travel time, with 10% margin."""
    diag = math.hypot(grid.lx, grid.ly)
    return 1.1 * (signal.support + diag / grid.c)


def simulate_forward(
    f: DensityField,
    signal: SourceSignal,
    grid: Grid,
    layout: ReceiverLayout,
    snapshot_every: int | None = None,
):
    """Forward scattering simulation of a frozen source density."""
    op = WaveOperator(grid, signal, layout)
    if snapshot_every:
        samples, snaps = op.forward(f.values, snapshot_every=snapshot_every)
        return ReceiverData(samples, grid.dt, layout), snaps
    samples = op.forward(f.values)
    return ReceiverData(samples, grid.dt, layout)


def simulate_moving(
    trajectory,
    signal: SourceSignal,
    grid: Grid,
    layout: ReceiverLayout,
    frame_period: float,
) -> list[ReceiverData]:
    """One frozen-source simulation per sampled frame of the trajectory.

    Frame j freezes the particles at t = j * frame_period; each frame is an
    independent zero-initial-condition solve of ``grid.nt`` steps.
    """
    from echoflow.flow import frame_positions

    op = WaveOperator(grid, signal, layout)
    out = []
    for pset in frame_positions(trajectory, frame_period):
        if pset.centers.shape[0] == 0:
            samples = np.zeros((len(layout), grid.nt))
        else:
            f = rasterize_particles(pset.centers, trajectory.diameter, grid)
            samples = op.forward(f.values)
        out.append(ReceiverData(samples, grid.dt, layout))
    return out


def _moving_forward(
    trajectory, signal: SourceSignal, grid: Grid, layout: ReceiverLayout
) -> np.ndarray:
    """Forward run whose source density is re-rasterized every timestep."""
    op = WaveOperator(grid, signal, layout)
    k = op.k
    u, up, ph, ps = k.alloc_state()
    un, phn, psn, tmp = k.alloc_state()
    samples = np.zeros((len(layout), grid.nt))
    for step in range(grid.nt):
        k.forward_step(u, up, ph, ps, un, phn, psn, tmp)
        lam = op._lam_at(step)
        if np.any(lam != 0.0):
            centers, active = trajectory.positions_at(step * grid.dt)
            centers = centers[active]
            if centers.shape[0]:
                f = rasterize_particles(centers, trajectory.diameter, grid)
                un[k.interior] += k.cl_interior * (lam * f.values)
        samples[:, step] = un[op._rows, op._cols]
        if not math.isfinite(float(np.sum(samples[:, step]))):
            raise RuntimeError(f"wave field diverged at step {step + 1}")
        u, up, un = un, u, up
        ph, phn = phn, ph
        ps, psn = psn, ps
    return samples


def compare_moving_vs_frozen(
    trajectory,
    signal: SourceSignal,
    grid: Grid,
    layout: ReceiverLayout,
    horizons: list[float],
) -> list[tuple[float, float]]:
    """L1 gap between truly-moving and frozen-source traces per horizon.

    Both runs share the step count covering max(horizons); the frozen run
    uses the density at t = 0, so every horizon's gap is a prefix integral
    of one fixed pair of runs.  Returns [(T, gap)] in the given order.
    """
    if not horizons or min(horizons) <= 0:
        raise ValueError("horizons must be positive")
    t_max = max(horizons)
    steps = max(1, math.ceil(round(t_max / grid.dt, 9)))
    run_grid = Grid(
        nx=grid.nx, ny=grid.ny, dx=grid.dx, dy=grid.dy,
        c=grid.c, dt=grid.dt, nt=steps, pml_width=grid.pml_width,
    )
    moving = _moving_forward(trajectory, signal, run_grid, layout)
    centers0, active0 = trajectory.positions_at(0.0)
    f0 = rasterize_particles(centers0[active0], trajectory.diameter, run_grid)
    frozen = WaveOperator(run_grid, signal, layout).forward(f0.values)
    absdiff = np.abs(moving - frozen)
    out = []
    for T in horizons:
        kT = min(steps, max(1, math.ceil(round(T / grid.dt, 9))))
        out.append((T, float(np.sum(absdiff[:, :kT]) * grid.dt)))
    return out
