"""Real desk-scale runs of the frozen criterion 7/8 configurations."""
import time

from echoflow.experiments import ExperimentConfig, run_vortex, run_vadcp_compare
from echoflow.flow import vortex_street
from echoflow.io import save_velocity_field

t0 = time.time()
cfg7 = ExperimentConfig(n_particles=13, flow_kind="taylor_green")
rep7 = run_vortex(cfg7)
print(f"[c7] np={rep7['nearest_point_error']:.4f} of={rep7['optical_flow_error']:.4f} "
      f"matches={rep7['n_matches']} frame_errs={[f'{e:.4f}' for e in rep7['frame_errors']]} "
      f"({time.time()-t0:.0f}s)", flush=True)

t0 = time.time()
street = vortex_street(4.71, 2.15, 236, 108)
path = save_velocity_field(street, "/tmp/street_final")
cfg8 = ExperimentConfig(diameter=0.06, hs_presmooth=2.0, hs_refinements=3)
rep8 = run_vadcp_compare(cfg8, path)
v = rep8["vadcp"]
print(f"[c8] inv={v['inverse_rel_err']:.4f} vadcp={v['vadcp_rel_err']:.4f} "
      f"of_dense={rep8['optical_flow_error']:.4f} n_detected={rep8['n_detected']} "
      f"({time.time()-t0:.0f}s)", flush=True)
