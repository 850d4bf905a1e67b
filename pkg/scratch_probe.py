"""Empirical probes to freeze module-test configurations and tolerances."""
import time

import numpy as np

from echoflow.grid import (
    GridConfig, build_grid, make_layout, rasterize_particles, relative_l2_error,
    ReceiverData,
)
from echoflow.acoustics import (
    SourceSignal, WaveOperator, WaveState, step_wave, simulate_forward,
    default_frame_duration,
)
from echoflow.inverse import InverseProblem, cgls_solve


def lab_grid(duration_mult=1.0, q0=100e3, nx=64, ny=32, lx=1.0, ly=0.5):
    sig = SourceSignal.gaussian_pulse(q0)
    probe = build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, nt=4))
    T = duration_mult * default_frame_duration(probe, sig)
    return build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, duration=T)), sig


def full_boundary(grid):
    pos = []
    for i in range(grid.nx):
        pos.append((i, 0))
        pos.append((i, grid.ny - 1))
    for j in range(1, grid.ny - 1):
        pos.append((0, j))
        pos.append((grid.nx - 1, j))
    return make_layout(grid, "custom", positions=pos)


# --- A: cgls three-disk example -------------------------------------------
def probe_cgls_disks(layout_kind="all_around", iters=100):
    grid, sig = lab_grid()
    rng = np.random.default_rng(3)
    d = 0.08
    centers = []
    while len(centers) < 3:
        p = rng.uniform([0.15, 0.12], [grid.lx - 0.15, grid.ly - 0.12])
        if all(np.linalg.norm(p - q) >= 2.5 * d for q in centers):
            centers.append(p)
    truth = rasterize_particles(np.array(centers), d, grid)
    layout = (full_boundary(grid) if layout_kind == "full"
              else make_layout(grid, "all_around"))
    data = simulate_forward(truth, sig, grid, layout)
    prob = InverseProblem(grid=grid, signal=sig, layout=layout, data=data,
                          max_iterations=iters, tolerance=0.0)
    t0 = time.time()
    rep = cgls_solve(prob)
    err = relative_l2_error(rep.field.values, truth.values)
    print(f"A cgls-disks {layout_kind}: n_rec={len(layout.positions)} nt={grid.nt} "
          f"err={err:.3e} t={time.time()-t0:.1f}s", flush=True)


# --- B: reciprocity ---------------------------------------------------------
def probe_reciprocity():
    grid, sig = lab_grid(q0=10e3)
    a = (20, 10)
    bcell = (45, 22)

    def trace(src, rec):
        layout = make_layout(grid, "custom", positions=[rec])
        f = np.zeros(grid.shape)
        f[src[1], src[0]] = 1.0
        op = WaveOperator(grid, sig, layout)
        return op.forward(f)[0]

    t_ab = trace(a, bcell)
    t_ba = trace(bcell, a)
    denom = np.abs(t_ab).max()
    print(f"B reciprocity: max diff rel = {np.abs(t_ab - t_ba).max() / denom:.3e}",
          flush=True)


# --- C: causality -----------------------------------------------------------
def probe_causality():
    grid, sig = lab_grid(q0=10e3)
    layout = make_layout(grid, "custom", positions=[(grid.nx - 1, grid.ny // 2)])
    f = np.zeros(grid.shape)
    src = (5, grid.ny // 2)
    f[src[1], src[0]] = 1.0
    op = WaveOperator(grid, sig, layout)
    tr = op.forward(f)[0]
    rec_x = (grid.nx - 1 + 0.5) * grid.dx
    src_x = (5 + 0.5) * grid.dx
    dist = rec_x - src_x
    t_arr = dist / grid.c
    k_arr = int(t_arr / grid.dt)
    peak = np.abs(tr).max()
    for margin in (2, 4, 6, 8):
        k = max(0, k_arr - margin)
        lead = np.abs(tr[:k]).max() / peak if k > 0 else 0.0
        print(f"C causality margin {margin}dt: leading max rel = {lead:.3e}",
              flush=True)
    # first arrival (1% threshold) window
    idx = np.flatnonzero(np.abs(tr) > 0.01 * peak)
    t_first = idx[0] * grid.dt if len(idx) else np.inf
    print(f"C first arrival: t_first={t_first:.4e} window=[{t_arr:.4e}, "
          f"{t_arr + sig.support:.4e}] dt={grid.dt:.2e}", flush=True)


# --- D: energy decay after turnoff -----------------------------------------
def probe_energy():
    grid, sig = lab_grid(q0=10e3, duration_mult=2.0)
    f = np.zeros(grid.shape)
    f[grid.ny // 2, grid.nx // 2] = 1.0
    op = WaveOperator(grid, sig, make_layout(grid, "top"))
    period = max(1, int(round((1.0 / 10e3) / grid.dt)))
    _, snaps = op.forward(f, snapshot_every=period)
    maxes = [float(np.abs(s).max()) for s in snaps]
    k_off = int(np.ceil(sig.support / grid.dt / period)) + 1
    tail = maxes[k_off:]
    ratios = [tail[i + 1] / tail[i] for i in range(len(tail) - 1) if tail[i] > 0]
    print(f"D energy: n_snaps={len(maxes)} worst growth per period after turnoff "
          f"= {max(ratios):.6f}", flush=True)


# --- E: injectivity (single cell, full boundary) ----------------------------
def probe_injectivity():
    grid, sig = lab_grid()
    layout = full_boundary(grid)
    rng = np.random.default_rng(11)
    for trial in range(3):
        f = np.zeros(grid.shape)
        ix = int(rng.integers(8, grid.nx - 8))
        iy = int(rng.integers(6, grid.ny - 6))
        f[iy, ix] = 1.0
        truth = np.copy(f)
        data = ReceiverData(WaveOperator(grid, sig, layout).forward(f), grid.dt, layout)
        prob = InverseProblem(grid=grid, signal=sig, layout=layout, data=data,
                              max_iterations=200, tolerance=0.0)
        rep = cgls_solve(prob)
        err = relative_l2_error(rep.field.values, truth)
        print(f"E injectivity trial {trial} cell=({ix},{iy}): err={err:.3e} "
              f"iters={rep.iterations}", flush=True)


# --- G: wavefront radius -----------------------------------------------------
def probe_wavefront():
    grid, _ = lab_grid(q0=10e3)
    state = WaveState.zeros(grid)
    src = np.zeros(grid.shape)
    src[grid.ny // 2, grid.nx // 2] = 1.0
    k_steps = 20
    for k in range(k_steps):
        state = step_wave(state, src if k == 0 else None, grid)
    u = state.interior(grid)
    cy, cx = grid.ny // 2, grid.nx // 2
    yy, xx = np.mgrid[0:grid.ny, 0:grid.nx]
    rad = np.sqrt(((xx - cx) * grid.dx) ** 2 + ((yy - cy) * grid.dy) ** 2)
    w = np.abs(u)
    r_peak = rad.flat[np.argmax(w)]
    r_theory = grid.c * k_steps * grid.dt
    print(f"G wavefront: r_peak={r_peak:.4f} r_theory={r_theory:.4f} "
          f"dx={grid.dx:.4f} diff_cells={(abs(r_peak - r_theory) / grid.dx):.2f}",
          flush=True)


probe_cgls_disks("all_around")
probe_cgls_disks("full")
probe_reciprocity()
probe_causality()
probe_energy()
probe_injectivity()
probe_wavefront()
