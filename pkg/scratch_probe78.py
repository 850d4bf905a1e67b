"""Probe criteria 7/8 knobs without wave solves.

Recon frames match truth to ~5e-3, so truth rasters are a faithful proxy
for the Horn-Schunck leg.  The V-ADCP leg never sees frames at all.
"""
import time

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
from echoflow.vadcp import BeamGeometry, compare_methods, measurement_region, vadcp_measure

LX, LY, NX, NY = 4.71, 2.15, 236, 108


def desk_grid():
    return ExperimentConfig().build()


def norm(fld):
    return _normalized(fld)


# ---------------------------------------------------------------- part A
print("=== A: V-ADCP vs exact region average on street variants ===", flush=True)
grid = desk_grid()
geom = BeamGeometry.for_grid(grid)
region = measurement_region(geom, grid)
xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
pts = np.column_stack([xx[region], yy[region]])

variants = [
    dict(),
    dict(vortex_strength=0.3),
    dict(vortex_strength=0.2),
    dict(vortex_strength=0.3, core_radius=0.35),
    dict(vortex_strength=0.45, core_radius=0.35),
    dict(vortex_strength=0.3, n_pairs=2),
    dict(vortex_strength=0.4, core_radius=0.30),
    dict(vortex_strength=0.5, core_radius=0.40),
]
for kw in variants:
    street = vortex_street(LX, LY, NX, NY, **kw)
    exact = street.evaluate(pts, 0.0).mean(axis=0)
    reading = vadcp_measure(street, geom, grid)
    rel = np.linalg.norm(reading.aggregate - exact) / np.linalg.norm(exact)
    print(
        f"  {kw!r:60s} exact=({exact[0]:+.4f},{exact[1]:+.4f}) "
        f"vadcp=({reading.aggregate[0]:+.4f},{reading.aggregate[1]:+.4f}) rel={rel:.4f}",
        flush=True,
    )


# ---------------------------------------------------------------- part B
print("=== B: HS sweep, Taylor-Green 13 particles (criterion 7 proxy) ===", flush=True)
cfg7 = ExperimentConfig(n_particles=13, flow_kind="taylor_green")
tg = VelocityField.taylor_green(LX, LY, 1.0)
centers7 = draw_particles(cfg7, np.random.default_rng(cfg7.seed))

for dT in (0.08, 0.04, 0.02):
    dt_adv = dT / cfg7.advect_substeps
    traj = advect(centers7, tg, dt_adv, cfg7.advect_substeps, cfg7.diameter)
    f0, f1 = frame_positions(traj, dT)
    r0 = rasterize_particles(f0.centers, f0.diameter, grid)
    r1 = rasterize_particles(f1.centers, f1.diameter, grid)
    det = [detect_particles(r) for r in (r0, r1)]
    sparse = nearest_point_velocities(det, dT)
    np_err = velocity_error(sparse, tg)
    print(f"  dT={dT}: np_err(quantization+chord)={np_err:.4f} matches={len(sparse.points)}", flush=True)
    for presmooth in (1.0, 2.0, 3.0):
        for alpha in (0.25, 0.5, 1.0):
            for iters in (300, 1000):
                t0 = time.time()
                dense = horn_schunck(
                    norm(r0), norm(r1), dT,
                    alpha=alpha, iterations=iters, presmooth_sigma=presmooth,
                )
                err = velocity_error(dense, tg)
                print(
                    f"    dT={dT} ps={presmooth} a={alpha} it={iters}: "
                    f"of_err={err:.4f}  ({time.time() - t0:.1f}s)",
                    flush=True,
                )


# ---------------------------------------------------------------- part C
print("=== C: HS sweep, street 450 particles (criterion 8 proxy) ===", flush=True)
street_kws = [dict(vortex_strength=0.3), dict(vortex_strength=0.3, core_radius=0.35)]
cfg8 = ExperimentConfig(n_particles=450, diameter=0.06, min_separation=0.0, margin=0.3)
centers8 = draw_particles(cfg8, np.random.default_rng(cfg8.seed))

for kw in street_kws:
    street = vortex_street(LX, LY, NX, NY, **kw)
    exact = street.evaluate(pts, 0.0).mean(axis=0)
    reading = vadcp_measure(street, geom, grid)
    vadcp_rel = np.linalg.norm(reading.aggregate - exact) / np.linalg.norm(exact)
    print(f"  street {kw!r}: vadcp_rel={vadcp_rel:.4f}", flush=True)
    for dT in (0.04, 0.02, 0.01):
        dt_adv = dT / cfg8.advect_substeps
        traj = advect(centers8, street, dt_adv, cfg8.advect_substeps, cfg8.diameter)
        f0, f1 = frame_positions(traj, dT)
        r0 = rasterize_particles(f0.centers, f0.diameter, grid)
        r1 = rasterize_particles(f1.centers, f1.diameter, grid)
        for presmooth in (1.0, 2.0):
            for alpha in (0.25, 0.5):
                for iters in (300, 1000):
                    dense = horn_schunck(
                        norm(r0), norm(r1), dT,
                        alpha=alpha, iterations=iters, presmooth_sigma=presmooth,
                    )
                    cmp = compare_methods(street, dense, geom, grid)
                    of_err = velocity_error(dense, street)
                    print(
                        f"    dT={dT} ps={presmooth} a={alpha} it={iters}: "
                        f"of_err={of_err:.4f} inv_rel={cmp['inverse_rel_err']:.4f} "
                        f"vadcp_rel={cmp['vadcp_rel_err']:.4f}",
                        flush=True,
                    )
print("probe done", flush=True)
