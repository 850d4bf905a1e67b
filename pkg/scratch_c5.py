"""Criterion-5 tuning: early-stopping sweep for the sigma=0.2 reconstruction.

One 60-iteration CGLS run per layout; centroid localization evaluated at
checkpoints from the solver callback (fields copied, x is reused in place).
"""

import time

import numpy as np

from echoflow.acoustics import default_frame_duration, simulate_forward
from echoflow.experiments import ExperimentConfig, draw_particles, sensing_array
from echoflow.grid import DensityField, make_layout, rasterize_particles, relative_l2_error
from echoflow.inverse import InverseProblem, add_noise, cgls_solve
from echoflow.velocimetry import detect_particles, matching_distances

config = ExperimentConfig()
probe = config.build()
grid = config.build(duration=default_frame_duration(probe, config.signal()))
signal = config.signal()
rng = np.random.default_rng(config.seed)
centers = draw_particles(config, rng)
truth = rasterize_particles(centers, config.diameter, grid)

CHECKPOINTS = (5, 10, 15, 20, 25, 30, 40, 60)

layouts = {
    "array": sensing_array(grid),
    "all_around": make_layout(grid, "all_around", per_horizontal=118, per_vertical=53),
}

for name, layout in layouts.items():
    t0 = time.time()
    data = simulate_forward(truth, signal, grid, layout)
    noisy = add_noise(data, 0.2, config.seed + 1)
    problem = InverseProblem(
        grid=grid, signal=signal, layout=layout, data=noisy,
        max_iterations=max(CHECKPOINTS), tolerance=0.0,
    )
    snaps = {}

    def grab(it, x, r_norm):
        if it in CHECKPOINTS:
            snaps[it] = x.copy()

    cgls_solve(problem, callback=grab)
    for it in CHECKPOINTS:
        field = DensityField(grid, snaps[it])
        err = relative_l2_error(field.values, truth.values)
        found = detect_particles(field).top(config.n_particles)
        dists = matching_distances(found.centers, centers)
        worst = float(dists.max()) if dists.size else float("nan")
        print(
            f"{name} it={it:3d} err={err:.4e} n={len(found)} worst={worst:.4f} "
            f"within={len(found) == 10 and bool(dists.size and dists.max() <= 0.14)}",
            flush=True,
        )
    print(f"{name} done in {time.time() - t0:.0f}s", flush=True)
