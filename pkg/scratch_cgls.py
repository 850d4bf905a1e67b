"""Scratch: desk-scale CGLS convergence per frequency + gradient FD check."""
import math
import time

import numpy as np

from echoflow.grid import (Grid, GridConfig, build_grid, make_layout,
                           rasterize_particles, relative_l2_error)
from echoflow.acoustics import SourceSignal, WaveOperator, default_frame_duration
from echoflow.inverse import InverseProblem, cgls_solve, gradient, objective
from echoflow.grid import DensityField, ReceiverData

rng = np.random.default_rng(7)

# 10 particles like the main setup, desk scale
base = build_grid(GridConfig(nx=236, ny=108, lx=4.71, ly=2.15, c=1500, nt=1, pml_width=20))
centers = []
while len(centers) < 10:
    p = rng.uniform([0.3, 0.3], [4.41, 1.85])
    if all(np.hypot(*(p - c)) > 0.5 for c in centers):
        centers.append(p)
centers = np.array(centers)

for q0 in (1e3, 1e4, 1e5):
    sig = SourceSignal.gaussian_pulse(q0)
    T = default_frame_duration(base, sig)
    nt = math.ceil(T / base.dt)
    g = Grid(nx=base.nx, ny=base.ny, dx=base.dx, dy=base.dy, c=base.c,
             dt=base.dt, nt=nt, pml_width=20)
    lay = make_layout(g, "all_around")
    truth = rasterize_particles(centers, 0.14, g)
    op = WaveOperator(g, sig, lay)
    data = ReceiverData(op.forward(truth.values), g.dt, lay)
    prob = InverseProblem(g, sig, lay, data, max_iterations=100)
    t0 = time.perf_counter()
    errs = {}
    def cb(it, x, rn, truth=truth, errs=errs):
        if it in (25, 50, 75, 100):
            errs[it] = relative_l2_error(x, truth.values)
    rep = cgls_solve(prob, callback=cb)
    err = relative_l2_error(rep.field, truth)
    print(f"q0={q0:9.0f} nt={nt} err100={err:.4e} "
          f"checkpoints={ {k: round(v,5) for k,v in errs.items()} } "
          f"relres={rep.final_relative_residual:.3e} t={time.perf_counter()-t0:.1f}s")

# gradient FD check on 64x32
g = build_grid(GridConfig(nx=64, ny=32, lx=0.64, ly=0.32, c=1500, nt=170, pml_width=20))
sig = SourceSignal.gaussian_pulse(10e3)
lay = make_layout(g, "all_around", per_horizontal=16, per_vertical=8)
truth = rasterize_particles([(0.3, 0.15), (0.45, 0.2)], 0.08, g)
op = WaveOperator(g, sig, lay)
data = ReceiverData(op.forward(truth.values), g.dt, lay)
prob = InverseProblem(g, sig, lay, data)
f0 = DensityField(g, rng.standard_normal(g.shape) * 0.1)
grad = gradient(f0, prob)
for trial in range(3):
    h = rng.standard_normal(g.shape)
    h /= np.linalg.norm(h)
    dirderiv = float(np.sum(grad.values * h) * g.cell_area)
    best = np.inf
    for eps in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        fp = DensityField(g, f0.values + eps * h)
        fm = DensityField(g, f0.values - eps * h)
        fd = (objective(fp, prob) - objective(fm, prob)) / (2 * eps)
        rel = abs(fd - dirderiv) / max(abs(dirderiv), 1e-300)
        best = min(best, rel)
        print(f"  dir {trial} eps={eps:.0e} fd={fd:.10e} grad={dirderiv:.10e} rel={rel:.3e}")
    print(f"dir {trial}: best rel = {best:.3e}")
