"""Second config sweep for the desk-scale 100 kHz reconstruction error."""
import time

import numpy as np

from echoflow.grid import GridConfig, build_grid, make_layout, rasterize_particles, relative_l2_error
from echoflow.acoustics import SourceSignal, simulate_forward, default_frame_duration
from echoflow.inverse import InverseProblem, cgls_solve


def full_boundary(grid):
    top = [(i, grid.ny - 1) for i in range(grid.nx)]
    bottom = [(i, 0) for i in range(grid.nx)]
    left = [(0, j) for j in range(1, grid.ny - 1)]
    right = [(grid.nx - 1, j) for j in range(1, grid.ny - 1)]
    return make_layout(grid, "custom", positions=top + bottom + left + right)


def run(tag, cfl, rec, q0=100e3, iters=100):
    rng = np.random.default_rng(7)
    lx, ly, d = 4.71, 2.15, 0.14
    nx, ny = 236, 108
    margin, min_sep = 0.3, 0.5
    centers = []
    while len(centers) < 10:
        p = rng.uniform([margin, margin], [lx - margin, ly - margin])
        if all(np.linalg.norm(p - q) >= min_sep for q in centers):
            centers.append(p)
    centers = np.array(centers)

    sig = SourceSignal.gaussian_pulse(q0)
    g0 = build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, nt=8, cfl_safety=cfl))
    T = default_frame_duration(g0, sig)
    grid = build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, duration=T, cfl_safety=cfl))
    layout = full_boundary(grid) if rec == "full" else make_layout(
        grid, "all_around", per_horizontal=rec[0], per_vertical=rec[1])

    truth = rasterize_particles(centers, d, grid)
    t0 = time.time()
    data = simulate_forward(truth, sig, grid, layout)
    prob = InverseProblem(grid=grid, signal=sig, layout=layout, data=data,
                          max_iterations=iters, tolerance=0.0)
    marks = {}

    def cb(it, x, rn):
        if it % 25 == 0:
            marks[it] = round(relative_l2_error(x, truth.values), 5)

    rep = cgls_solve(prob, callback=cb)
    err = relative_l2_error(rep.field.values, truth.values)
    print(f"{tag}: n_rec={len(layout.positions)} nt={grid.nt} dt={grid.dt:.3e} "
          f"err={err:.4e} marks={marks} t={time.time()-t0:.0f}s", flush=True)


if __name__ == "__main__":
    run("full-cfl0.45", 0.45, "full")
    run("full-cfl0.30", 0.30, "full")
    run("r192-cfl0.45", 0.45, (64, 32))
    run("full-cfl0.45-1kHz", 0.45, "full", q0=1e3)
    run("full-cfl0.45-10kHz", 0.45, "full", q0=10e3)
