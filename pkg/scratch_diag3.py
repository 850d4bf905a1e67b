"""Multi-ring receiver sweep on the desk grid, cfl 0.9."""
import time

import numpy as np

from echoflow.grid import GridConfig, build_grid, make_layout, rasterize_particles, relative_l2_error
from echoflow.acoustics import SourceSignal, simulate_forward, default_frame_duration
from echoflow.inverse import InverseProblem, cgls_solve


def rings(grid, offsets):
    pos = []
    for k in offsets:
        for i in range(k, grid.nx - k):
            pos.append((i, k))
            pos.append((i, grid.ny - 1 - k))
        for j in range(k + 1, grid.ny - 1 - k):
            pos.append((k, j))
            pos.append((grid.nx - 1 - k, j))
    return make_layout(grid, "custom", positions=pos)


def run(tag, offsets, q0=100e3, iters=100):
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
    g0 = build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, nt=8))
    T = default_frame_duration(g0, sig)
    grid = build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, duration=T))
    layout = rings(grid, offsets)

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
    run("ring0-q100k", [0])
    run("ring03-q100k", [0, 3])
    run("ring0246-q100k", [0, 2, 4, 6])
    run("ring03-q10k", [0, 3], q0=10e3)
    run("ring03-q1k", [0, 3], q0=1e3)
