"""Preflight desk-scale runs for the coverage, noise, vortex and street criteria."""

import time
from pathlib import Path

from echoflow.experiments import (
    ExperimentConfig,
    run_example2,
    run_example3,
    run_vadcp_compare,
    run_vortex,
)
from echoflow.flow import save_velocity_field, vortex_street

t0 = time.time()

# criterion 4: coverage ordering at the high-frequency setting
errors = {}
for tag in ("top", "top_bottom", "all_around"):
    report = run_example2(ExperimentConfig(), tag)
    errors[tag] = report["relative_l2_error"]
    print(
        f"c4 {tag}: err={errors[tag]:.4e} n_rec={report['n_receivers']} "
        f"bottom={report['bottom_half_error']:.4e} top={report['top_half_error']:.4e} "
        f"t={time.time() - t0:.0f}s",
        flush=True,
    )
print(
    "c4 ordering:", errors["all_around"] < errors["top_bottom"] < errors["top"], flush=True
)

# criterion 5: noisy data, centroids within one diameter
t1 = time.time()
report = run_example3(ExperimentConfig(), sigma=0.2)
print(
    f"c5: n_detected={report['n_detected']} max_dist={report['max_localization_distance']} "
    f"within={report['localized_within_diameter']} err={report['relative_l2_error']:.4e} "
    f"t={time.time() - t1:.0f}s",
    flush=True,
)

# criterion 7: Taylor-Green, 13 particles, both methods under 10 percent
t2 = time.time()
config = ExperimentConfig(n_particles=13, flow_kind="taylor_green")
report = run_vortex(config)
print(
    f"c7: np_err={report['nearest_point_error']:.4f} of_err={report['optical_flow_error']:.4f} "
    f"n_matches={report['n_matches']} "
    f"frames={[round(f['relative_l2_error'], 4) for f in report['frames']]} "
    f"t={time.time() - t2:.0f}s",
    flush=True,
)

# criterion 8: imported street field, inverse beats the virtual profiler
t3 = time.time()
street = vortex_street(4.71, 2.15, 236, 108)
field_path = save_velocity_field(street, "/tmp/street_desk")
config = ExperimentConfig(diameter=0.06)
report = run_vadcp_compare(config, field_path)
print(
    f"c8: vadcp_rel={report['vadcp']['vadcp_rel_err']:.4f} "
    f"inverse_rel={report['vadcp']['inverse_rel_err']:.4f} "
    f"of_err={report['optical_flow_error']:.4f} "
    f"frames={[round(f['relative_l2_error'], 4) for f in report['frames']]} "
    f"t={time.time() - t3:.0f}s",
    flush=True,
)
print("total", time.time() - t0, flush=True)
