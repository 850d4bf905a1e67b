"""Mask-definition and convergence probe for the optical-flow legs."""
import numpy as np

from echoflow import (
    ExperimentConfig,
    horn_schunck,
    rasterize_particles,
    velocity_error,
)
from echoflow.experiments import _normalized, draw_particles
from echoflow.flow import VelocityField, advect, frame_positions, vortex_street
from echoflow.vadcp import BeamGeometry, compare_methods

LX, LY, NX, NY = 4.71, 2.15, 236, 108
grid = ExperimentConfig().build()

cfg7 = ExperimentConfig(n_particles=13, flow_kind="taylor_green")
tg = VelocityField.taylor_green(LX, LY, 1.0)
centers7 = draw_particles(cfg7, np.random.default_rng(cfg7.seed))

print("=== criterion 7: mask variants, TG ===", flush=True)
for dT in (0.08, 0.04):
    dt_adv = dT / cfg7.advect_substeps
    traj = advect(centers7, tg, dt_adv, cfg7.advect_substeps, cfg7.diameter)
    f0, f1 = frame_positions(traj, dT)
    r0 = rasterize_particles(f0.centers, f0.diameter, grid)
    r1 = rasterize_particles(f1.centers, f1.diameter, grid)
    raw_mask = (r0.values > 0.5) | (r1.values > 0.5)
    for presmooth in (2.0, 3.0):
        for alpha in (0.5, 1.0):
            for iters in (1000, 5000):
                dense = horn_schunck(
                    _normalized(r0), _normalized(r1), dT,
                    alpha=alpha, iterations=iters, presmooth_sigma=presmooth,
                )
                halo = velocity_error(dense, tg)
                raw = velocity_error(dense, tg, mask=raw_mask)
                print(
                    f"  dT={dT} ps={presmooth} a={alpha} it={iters}: "
                    f"halo={halo:.4f} raw_support={raw:.4f}",
                    flush=True,
                )

print("=== criterion 8: mask variants, street ===", flush=True)
cfg8 = ExperimentConfig(n_particles=450, diameter=0.06, min_separation=0.0, margin=0.3)
centers8 = draw_particles(cfg8, np.random.default_rng(cfg8.seed))
geom = BeamGeometry.for_grid(grid)
for kw in (dict(vortex_strength=0.3), dict(vortex_strength=0.3, core_radius=0.35)):
    street = vortex_street(LX, LY, NX, NY, **kw)
    for dT in (0.04, 0.02):
        dt_adv = dT / cfg8.advect_substeps
        traj = advect(centers8, street, dt_adv, cfg8.advect_substeps, cfg8.diameter)
        f0, f1 = frame_positions(traj, dT)
        r0 = rasterize_particles(f0.centers, f0.diameter, grid)
        r1 = rasterize_particles(f1.centers, f1.diameter, grid)
        raw_mask = (r0.values > 0.5) | (r1.values > 0.5)
        for presmooth in (2.0,):
            for alpha in (0.5, 1.0):
                for iters in (1000,):
                    dense = horn_schunck(
                        _normalized(r0), _normalized(r1), dT,
                        alpha=alpha, iterations=iters, presmooth_sigma=presmooth,
                    )
                    halo = velocity_error(dense, street)
                    raw = velocity_error(dense, street, mask=raw_mask)
                    cmp = compare_methods(street, dense, geom, grid)
                    print(
                        f"  {kw!r} dT={dT} ps={presmooth} a={alpha} it={iters}: "
                        f"halo={halo:.4f} raw={raw:.4f} inv={cmp['inverse_rel_err']:.4f}",
                        flush=True,
                    )

print("=== street geometry variants for a milder profiler error ===", flush=True)
xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
from echoflow.vadcp import measurement_region, vadcp_measure

region = measurement_region(geom, grid)
pts = np.column_stack([xx[region], yy[region]])
for kw in (
    dict(vortex_strength=0.3, n_pairs=4),
    dict(vortex_strength=0.3, n_pairs=5),
    dict(vortex_strength=0.3, x_start=0.15 * LX),
    dict(vortex_strength=0.3, n_pairs=4, x_start=0.15 * LX),
    dict(vortex_strength=0.2, n_pairs=4, x_start=0.15 * LX),
    dict(vortex_strength=0.4, n_pairs=4, x_start=0.15 * LX),
    dict(vortex_strength=0.3, n_pairs=4, x_start=0.2 * LX),
    dict(vortex_strength=0.15),
    dict(vortex_strength=0.1),
):
    street = vortex_street(LX, LY, NX, NY, **kw)
    exact = street.evaluate(pts, 0.0).mean(axis=0)
    reading = vadcp_measure(street, geom, grid)
    rel = np.linalg.norm(reading.aggregate - exact) / np.linalg.norm(exact)
    print(
        f"  {kw!r:55s} exact=({exact[0]:+.4f},{exact[1]:+.4f}) rel={rel:.4f}",
        flush=True,
    )
print("probe7b done", flush=True)
