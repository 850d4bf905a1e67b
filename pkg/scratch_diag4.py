"""Interior-lattice receiver probes for the desk 100 kHz reconstruction."""
import time

import numpy as np

from echoflow.grid import GridConfig, build_grid, make_layout, rasterize_particles, relative_l2_error
from echoflow.acoustics import SourceSignal, simulate_forward, default_frame_duration
from echoflow.inverse import InverseProblem, cgls_solve


def ring(grid):
    pos = []
    for i in range(grid.nx):
        pos.append((i, 0))
        pos.append((i, grid.ny - 1))
    for j in range(1, grid.ny - 1):
        pos.append((0, j))
        pos.append((grid.nx - 1, j))
    return pos


def lattice(grid, stride, start=4):
    return [
        (i, j)
        for i in range(start, grid.nx - start + 1, stride)
        for j in range(start, grid.ny - start + 1, stride)
    ]


def run(tag, positions_fn, q0=100e3, iters=100):
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
    pos = sorted(set(positions_fn(grid)))
    layout = make_layout(grid, "custom", positions=pos)

    truth = rasterize_particles(centers, d, grid)
    t0 = time.time()
    data = simulate_forward(truth, sig, grid, layout)
    prob = InverseProblem(grid=grid, signal=sig, layout=layout, data=data,
                          max_iterations=iters, tolerance=0.0)
    marks = {}

    def cb(it, x, rn):
        if it % 25 == 0:
            marks[it] = round(relative_l2_error(x, truth.values), 5)

    rep = cgls_solve(prob)
    err = relative_l2_error(rep.field.values, truth.values)
    print(f"{tag}: n_rec={len(layout.positions)} nt={grid.nt} "
          f"err={err:.4e} marks={marks} t={time.time()-t0:.0f}s", flush=True)


if __name__ == "__main__":
    run("ring+lat8", lambda g: ring(g) + lattice(g, 8))
    run("ring+lat4", lambda g: ring(g) + lattice(g, 4))
    run("lat4-only", lambda g: lattice(g, 4))
    run("lat2-only", lambda g: lattice(g, 2))
