"""Preflight: run_example1 at the three pulse frequencies, then rerun the
high-frequency leg and compare manifests for byte determinism."""

import json
import shutil
import time
from pathlib import Path

from echoflow.experiments import ExperimentConfig, emit_artifacts, run_example1

config = ExperimentConfig()

errors = {}
for q0 in (1e3, 10e3, 100e3):
    t0 = time.time()
    out = Path(f"/tmp/accept3/q{int(q0)}")
    if out.exists():
        shutil.rmtree(out)
    report = run_example1(config, q0=q0, out_dir=out)
    emit_artifacts(report, out)
    errors[q0] = report["relative_l2_error"]
    print(
        f"q0={q0:g} err={report['relative_l2_error']:.4e} "
        f"n_rec={report['n_receivers']} t={time.time() - t0:.0f}s",
        flush=True,
    )

print("trend:", errors[1e3] > errors[10e3] > errors[100e3], flush=True)
print("criterion3:", errors[100e3] < 1e-2, flush=True)

out2 = Path("/tmp/accept3/q100000_rerun")
if out2.exists():
    shutil.rmtree(out2)
report2 = run_example1(config, q0=100e3, out_dir=out2)
emit_artifacts(report2, out2)
m1 = json.loads((Path("/tmp/accept3/q100000") / "manifest.json").read_text())
m2 = json.loads((out2 / "manifest.json").read_text())
print("criterion10 manifests identical:", m1 == m2, flush=True)
if m1 != m2:
    for a, b in zip(m1["files"], m2["files"]):
        if a != b:
            print("  differs:", a["path"], a["sha256"][:12], b["sha256"][:12], flush=True)
