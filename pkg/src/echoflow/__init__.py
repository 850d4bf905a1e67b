"""Acoustic scattering simulation and source-reconstruction flow velocimetry.

The pipeline: disk-shaped particles advected by a synthetic flow scatter an
ultrasonic pulse; per-frame receiver traces are inverted for the particle
density by conjugate gradients on the discrete forward map; particle motion
between reconstructed frames yields the flow velocity, which is compared
against a virtual ADCP baseline.
"""

from echoflow.acoustics import (
    SourceSignal,
    WaveOperator,
    default_frame_duration,
    simulate_forward,
    simulate_moving,
)
from echoflow.experiments import ExperimentConfig, sensing_array
from echoflow.flow import TrajectorySet, VelocityField, advect, frame_positions
from echoflow.grid import (
    DensityField,
    Grid,
    GridConfig,
    ReceiverData,
    ReceiverLayout,
    build_grid,
    cfl_timestep,
    make_layout,
    rasterize_particles,
    relative_l2_error,
)
from echoflow.inverse import InverseProblem, add_noise, apply_adjoint, cgls_solve
from echoflow.vadcp import BeamGeometry, doppler_shift, vadcp_measure
from echoflow.velocimetry import (
    FlowEstimate,
    detect_particles,
    horn_schunck,
    nearest_point_velocities,
    velocity_error,
)

__all__ = [
    "BeamGeometry",
    "DensityField",
    "ExperimentConfig",
    "FlowEstimate",
    "Grid",
    "GridConfig",
    "InverseProblem",
    "ReceiverData",
    "ReceiverLayout",
    "SourceSignal",
    "TrajectorySet",
    "VelocityField",
    "WaveOperator",
    "add_noise",
    "advect",
    "apply_adjoint",
    "build_grid",
    "cfl_timestep",
    "cgls_solve",
    "default_frame_duration",
    "detect_particles",
    "doppler_shift",
    "frame_positions",
    "horn_schunck",
    "make_layout",
    "nearest_point_velocities",
    "rasterize_particles",
    "relative_l2_error",
    "sensing_array",
    "simulate_forward",
    "simulate_moving",
    "vadcp_measure",
    "velocity_error",
]

__version__ = "0.1.0"
