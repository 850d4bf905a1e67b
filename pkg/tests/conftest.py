"""Shared fixtures, layout helpers, and the acceptance summary hook."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from echoflow.acoustics import SourceSignal, default_frame_duration
from echoflow.grid import Grid, GridConfig, ReceiverLayout, build_grid, make_layout

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=20,
    suppress_health_check=[
        HealthCheck.too_slow,
        HealthCheck.data_too_large,
        HealthCheck.function_scoped_fixture,
    ],
)
settings.load_profile("suite")


def small_tank(q0: float = 10e3, duration_mult: float = 1.0) -> tuple[Grid, SourceSignal]:
    """64x32 water tank sized so the pulse q0 is well resolved in time."""
    signal = SourceSignal.gaussian_pulse(q0)
    config = GridConfig(nx=64, ny=32, lx=1.0, ly=0.5, c=1500.0, nt=4)
    duration = duration_mult * default_frame_duration(build_grid(config), signal)
    grid = build_grid(
        GridConfig(nx=64, ny=32, lx=1.0, ly=0.5, c=1500.0, duration=duration)
    )
    return grid, signal


def full_ring(grid: Grid) -> ReceiverLayout:
    """All-around layout with one receiver in every boundary cell."""
    return make_layout(
        grid, "all_around", per_horizontal=grid.nx, per_vertical=grid.ny - 2
    )


@pytest.fixture(scope="session")
def tank_10khz() -> tuple[Grid, SourceSignal]:
    return small_tank(q0=10e3)


@pytest.fixture(scope="session")
def tank_100khz() -> tuple[Grid, SourceSignal]:
    return small_tank(q0=100e3)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(20260816)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = ("PASS" if ok else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[number]
        line = f"criterion {number:2d} [{status}] {title}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
