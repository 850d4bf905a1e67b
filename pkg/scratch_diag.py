"""Diagnose slow CGLS convergence at 100 kHz on the desk profile."""
import math
import time

import numpy as np

from echoflow.grid import (Grid, GridConfig, build_grid, make_layout,
                           rasterize_particles, relative_l2_error, ReceiverData)
from echoflow.acoustics import SourceSignal, WaveOperator, default_frame_duration
from echoflow.inverse import InverseProblem, cgls_solve

rng = np.random.default_rng(7)
base = build_grid(GridConfig(nx=236, ny=108, lx=4.71, ly=2.15, c=1500, nt=1, pml_width=20))
centers = []
while len(centers) < 10:
    p = rng.uniform([0.3, 0.3], [4.41, 1.85])
    if all(np.hypot(*(p - c)) > 0.5 for c in centers):
        centers.append(p)
centers = np.array(centers)
sig = SourceSignal.gaussian_pulse(1e5)


def run(tag, lay_kind, ph, pv, t_mult, iters):
    T = default_frame_duration(base, sig) * t_mult
    nt = math.ceil(T / base.dt)
    g = Grid(nx=base.nx, ny=base.ny, dx=base.dx, dy=base.dy, c=base.c,
             dt=base.dt, nt=nt, pml_width=20)
    if lay_kind == "full":
        pos = ([(i, 0) for i in range(g.nx)] + [(i, g.ny - 1) for i in range(g.nx)]
               + [(0, j) for j in range(1, g.ny - 1)]
               + [(g.nx - 1, j) for j in range(1, g.ny - 1)])
        from echoflow.grid import ReceiverLayout
        lay = ReceiverLayout(tuple(pos), tag="custom")
    else:
        lay = make_layout(g, "all_around", per_horizontal=ph, per_vertical=pv)
    truth = rasterize_particles(centers, 0.14, g)
    op = WaveOperator(g, sig, lay)
    data = ReceiverData(op.forward(truth.values), g.dt, lay)
    prob = InverseProblem(g, sig, lay, data, max_iterations=iters)
    marks = {}
    def cb(it, x, rn, truth=truth, marks=marks):
        if it % 50 == 0:
            marks[it] = round(relative_l2_error(x, truth.values), 5)
    t0 = time.perf_counter()
    rep = cgls_solve(prob, callback=cb)
    err = relative_l2_error(rep.field, truth)
    # error split: disk cells vs background
    mask = truth.values > 0.5
    diff = rep.field.values - truth.values
    e_in = np.linalg.norm(diff[mask]) / np.linalg.norm(truth.values)
    e_out = np.linalg.norm(diff[~mask]) / np.linalg.norm(truth.values)
    print(f"{tag}: n_rec={len(lay)} nt={nt} err={err:.4e} in={e_in:.4e} "
          f"out={e_out:.4e} marks={marks} t={time.perf_counter()-t0:.0f}s",
          flush=True)


run("baseline-400it", "all_around", 32, 16, 1.0, 400)
run("rec192-100it", "all_around", 64, 32, 1.0, 100)
run("T2x-100it", "all_around", 32, 16, 2.0, 100)
run("full-boundary-100it", "full", 0, 0, 1.0, 100)
