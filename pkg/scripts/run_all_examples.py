#!/usr/bin/env python3
"""Run every preset experiment end to end and collect the artifacts.

This is the long-form driver: the frequency sweep, the receiver-coverage
comparison, the noise series, the vortex velocimetry run and the imported
vortex-street comparison, each in its own subdirectory of --out.  Expect
roughly an hour at the desk profile.
"""

import argparse
import dataclasses
import json
import time
from pathlib import Path

from echoflow.experiments import (
    ExperimentConfig,
    emit_artifacts,
    run_example1,
    run_example2,
    run_example3,
    run_karman,
    run_vadcp_compare,
    run_vortex,
)
from echoflow.flow import save_velocity_field, vortex_street


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs"))
    parser.add_argument("--profile", choices=("desk", "paper"), default="desk")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    config = ExperimentConfig(profile=args.profile, seed=args.seed)
    t0 = time.time()
    summary = {}

    for q0 in (1e3, 10e3, 100e3):
        out = args.out / f"example1_q{int(q0)}"
        report = run_example1(config, q0=q0, out_dir=out)
        emit_artifacts(report, out)
        summary[report["name"]] = report["relative_l2_error"]
        print(f"{report['name']}: error {report['relative_l2_error']:.3e}")

    for layout in ("top", "top_bottom", "all_around"):
        out = args.out / f"example2_{layout}"
        report = run_example2(config, layout, out_dir=out)
        emit_artifacts(report, out)
        summary[report["name"]] = report["relative_l2_error"]
        print(f"{report['name']}: error {report['relative_l2_error']:.3e}")

    for sigma in (0.05, 0.1, 0.2):
        out = args.out / f"example3_s{sigma:g}"
        report = run_example3(config, sigma, out_dir=out)
        emit_artifacts(report, out)
        summary[report["name"]] = report["max_localization_distance"]
        print(f"{report['name']}: worst centroid miss "
              f"{report['max_localization_distance']}")

    vortex_cfg = dataclasses.replace(
        config, n_particles=13, flow_kind="taylor_green")
    out = args.out / "vortex"
    report = run_vortex(vortex_cfg, out_dir=out)
    emit_artifacts(report, out)
    summary["vortex_nearest_point"] = report["nearest_point_error"]
    summary["vortex_optical_flow"] = report["optical_flow_error"]
    print(f"vortex: nearest-point {report['nearest_point_error']:.3%}, "
          f"optical-flow {report['optical_flow_error']:.3%}")

    nx, ny, _, _ = config.resolved()
    street = vortex_street(config.lx, config.ly, nx, ny)
    field_path = save_velocity_field(street, args.out / "street")
    karman_cfg = dataclasses.replace(config, n_particles=150, diameter=0.06)
    out = args.out / "karman"
    report = run_karman(karman_cfg, field_path=field_path, out_dir=out)
    emit_artifacts(report, out)
    summary["karman_optical_flow"] = report["optical_flow_error"]
    print(f"karman: optical-flow {report['optical_flow_error']:.3%}")

    compare_cfg = dataclasses.replace(config, diameter=0.06)
    out = args.out / "vadcp_compare"
    report = run_vadcp_compare(compare_cfg, field_path, out_dir=out)
    emit_artifacts(report, out)
    summary["vadcp_rel_err"] = report["vadcp"]["vadcp_rel_err"]
    summary["inverse_rel_err"] = report["vadcp"]["inverse_rel_err"]
    print(f"vadcp-compare: inverse {report['vadcp']['inverse_rel_err']:.3%} "
          f"vs profiler {report['vadcp']['vadcp_rel_err']:.3%}")

    summary["wall_time_s"] = time.time() - t0
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"done in {summary['wall_time_s']:.0f}s, summary at {args.out}/summary.json")


if __name__ == "__main__":
    main()
