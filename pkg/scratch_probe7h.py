"""Margin-hunting sweep: TG center vs midpoint eval, street inverse leg."""
import numpy as np

from echoflow import (
    ExperimentConfig,
    detect_particles,
    horn_schunck,
    nearest_point_velocities,
    rasterize_particles,
    velocity_error,
)
from echoflow.experiments import _normalized, draw_particles
from echoflow.flow import VelocityField, advect, frame_positions, vortex_street
from echoflow.vadcp import BeamGeometry, compare_methods
from echoflow.velocimetry import FlowEstimate

LX, LY = 4.71, 2.15
grid = ExperimentConfig().build()

print("=== TG margin sweep ===", flush=True)
cfg = ExperimentConfig(n_particles=13, flow_kind="taylor_green")
tg = VelocityField.taylor_green(LX, LY, 1.0)
centers = draw_particles(cfg, np.random.default_rng(cfg.seed))
for dT in (0.07, 0.08):
    dt_adv = dT / cfg.advect_substeps
    traj = advect(centers, tg, dt_adv, cfg.advect_substeps, cfg.diameter)
    f0, f1 = frame_positions(traj, dT)
    r0 = rasterize_particles(f0.centers, f0.diameter, grid)
    r1 = rasterize_particles(f1.centers, f1.diameter, grid)
    det = [detect_particles(r) for r in (r0, r1)]
    np_err = velocity_error(nearest_point_velocities(det, dT), tg)
    pts = det[0].centers
    for ps in (2.5, 3.0):
        for alpha in (1.0, 1.5):
            for iters in (200, 400):
                for refs in (1, 2):
                    dense = horn_schunck(
                        _normalized(r0), _normalized(r1), dT,
                        alpha=alpha, iterations=iters, presmooth_sigma=ps,
                        refinements=refs,
                    )
                    vec = dense.at_points(pts)
                    e_c = velocity_error(
                        FlowEstimate(frame_period=dT, points=pts, velocities=vec), tg
                    )
                    mid = pts + 0.5 * dT * vec
                    e_m = velocity_error(
                        FlowEstimate(frame_period=dT, points=mid, velocities=vec), tg
                    )
                    print(
                        f"  dT={dT} ps={ps} a={alpha} it={iters} refs={refs}: "
                        f"np={np_err:.4f} of_center={e_c:.4f} of_mid={e_m:.4f}",
                        flush=True,
                    )

print("=== street inverse-leg sweep ===", flush=True)
cfg8 = ExperimentConfig(n_particles=450, diameter=0.06, min_separation=0.0, margin=0.3)
centers8 = draw_particles(cfg8, np.random.default_rng(cfg8.seed))
geom = BeamGeometry.for_grid(grid)
for kw in (
    dict(vortex_strength=0.3),
    dict(vortex_strength=0.3, n_pairs=4, x_start=0.15 * LX),
):
    street = vortex_street(LX, LY, 236, 108, **kw)
    dT = 0.08
    dt_adv = dT / cfg8.advect_substeps
    traj = advect(centers8, street, dt_adv, cfg8.advect_substeps, cfg8.diameter)
    f0, f1 = frame_positions(traj, dT)
    r0 = rasterize_particles(f0.centers, f0.diameter, grid)
    r1 = rasterize_particles(f1.centers, f1.diameter, grid)
    for ps in (2.0, 2.5):
        for alpha in (1.0, 1.5, 2.0):
            for refs in (2, 3):
                dense = horn_schunck(
                    _normalized(r0), _normalized(r1), dT,
                    alpha=alpha, iterations=200, presmooth_sigma=ps,
                    refinements=refs,
                )
                cmp = compare_methods(street, dense, geom, grid)
                print(
                    f"  {kw!r} ps={ps} a={alpha} refs={refs}: "
                    f"inv={cmp['inverse_rel_err']:.4f} vadcp={cmp['vadcp_rel_err']:.4f}",
                    flush=True,
                )
print("done", flush=True)
