"""Grid construction, rasterization, layouts, and field serialization."""

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echoflow.grid import (
    DensityField,
    GridConfig,
    ReceiverData,
    ReceiverLayout,
    build_grid,
    cfl_timestep,
    grid_to_dict,
    load_field,
    load_receiver_csv,
    load_receiver_raw,
    make_layout,
    rasterize_particles,
    relative_l2_error,
    save_field,
    save_receiver_csv,
    save_receiver_raw,
    sha256_of,
)


class TestCflTimestep:
    def test_unit_grid(self):
        assert cfl_timestep((1.0, 1.0), 1.0, 1.0) == pytest.approx(
            1.0 / math.sqrt(2.0), rel=1e-15
        )

    def test_centimeter_water_grid(self):
        dt = cfl_timestep((0.01, 0.01), 1500.0, 0.3)
        assert dt == pytest.approx(1.414213562373095e-06, rel=1e-12)

    def test_anisotropic_spacing(self):
        dt = cfl_timestep((0.02, 0.01), 1500.0, 1.0)
        assert dt == pytest.approx(1.0 / (1500.0 * math.sqrt(2500.0 + 10000.0)))

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.5])
    def test_safety_range(self, bad):
        with pytest.raises(ValueError):
            cfl_timestep((0.01, 0.01), 1500.0, bad)

    def test_rejects_nonpositive_inputs(self):
        with pytest.raises(ValueError):
            cfl_timestep((0.0, 0.01), 1500.0)
        with pytest.raises(ValueError):
            cfl_timestep((0.01, 0.01), -1.0)

    @given(
        dx=st.floats(1e-4, 1.0),
        dy=st.floats(1e-4, 1.0),
        c=st.floats(1.0, 5000.0),
        safety=st.floats(0.05, 1.0),
    )
    def test_result_satisfies_stability_bound(self, dx, dy, c, safety):
        dt = cfl_timestep((dx, dy), c, safety)
        assert c * dt * math.sqrt(1 / dx**2 + 1 / dy**2) <= 1.0 + 1e-12


class TestBuildGrid:
    def test_tank_spacing(self):
        grid = build_grid(GridConfig(nx=472, ny=216, lx=4.71, ly=2.15, c=1500.0, nt=10))
        assert grid.dx == pytest.approx(4.71 / 472, rel=1e-15)
        assert grid.dy == pytest.approx(2.15 / 216, rel=1e-15)
        assert grid.lx == pytest.approx(4.71)
        assert grid.ly == pytest.approx(2.15)

    def test_duration_rounds_up(self):
        config = GridConfig(nx=64, ny=32, lx=1.0, ly=0.5, c=1500.0, duration=1e-3)
        grid = build_grid(config)
        assert grid.nt == math.ceil(1e-3 / grid.dt)
        assert grid.duration >= 1e-3

    def test_nt_and_duration_conflict(self):
        with pytest.raises(ValueError):
            build_grid(GridConfig(nx=8, ny=8, lx=1, ly=1, c=1, nt=5, duration=1.0))
        with pytest.raises(ValueError):
            build_grid(GridConfig(nx=8, ny=8, lx=1, ly=1, c=1))

    def test_explicit_dt_must_be_stable(self):
        limit = cfl_timestep((1 / 8, 1 / 8), 1.0, 1.0)
        with pytest.raises(ValueError):
            build_grid(
                GridConfig(nx=8, ny=8, lx=1, ly=1, c=1, nt=5, dt=1.5 * limit)
            )
        grid = build_grid(GridConfig(nx=8, ny=8, lx=1, ly=1, c=1, nt=5, dt=0.5 * limit))
        assert grid.dt == pytest.approx(0.5 * limit)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            build_grid(GridConfig(nx=2, ny=8, lx=1, ly=1, c=1, nt=5))

    def test_contains(self):
        grid = build_grid(GridConfig(nx=8, ny=8, lx=1, ly=1, c=1, nt=5))
        inside = grid.contains(np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]]))
        assert inside.all()
        outside = grid.contains(np.array([[-0.01, 0.5], [0.5, 1.01]]))
        assert not outside.any()

    def test_round_trip_dict(self):
        grid = build_grid(GridConfig(nx=16, ny=8, lx=2, ly=1, c=10, nt=7))
        d = grid_to_dict(grid)
        assert d["nx"] == 16 and d["nt"] == 7 and d["dt"] == grid.dt


class TestDensityField:
    def test_shape_validation(self):
        grid = build_grid(GridConfig(nx=8, ny=4, lx=1, ly=0.5, c=1, nt=2))
        with pytest.raises(ValueError):
            DensityField(grid, np.zeros((8, 4)))
        field = DensityField.zeros(grid)
        assert field.values.shape == (4, 8)

    def test_rejects_nan(self):
        grid = build_grid(GridConfig(nx=8, ny=4, lx=1, ly=0.5, c=1, nt=2))
        bad = np.zeros((4, 8))
        bad[2, 3] = np.nan
        with pytest.raises(ValueError):
            DensityField(grid, bad)

    def test_norm_uses_cell_area(self):
        grid = build_grid(GridConfig(nx=8, ny=4, lx=1, ly=0.5, c=1, nt=2))
        field = DensityField(grid, np.ones(grid.shape))
        assert field.norm() == pytest.approx(math.sqrt(32 * grid.cell_area))


class TestRasterize:
    def make_grid(self):
        return build_grid(GridConfig(nx=200, ny=120, lx=2.0, ly=1.2, c=1500.0, nt=2))

    def test_disk_cell_count_matches_area(self):
        grid = self.make_grid()
        field = rasterize_particles(np.array([[1.0, 0.6]]), 0.14, grid)
        count = int(field.values.sum())
        expected = math.pi * 0.07**2 / grid.cell_area
        assert abs(count - expected) <= 0.1 * expected
        assert set(np.unique(field.values)) <= {0.0, 1.0}

    def test_overlapping_disks_superpose(self):
        grid = self.make_grid()
        one = rasterize_particles(np.array([[1.0, 0.6]]), 0.14, grid)
        two = rasterize_particles(np.array([[1.0, 0.6], [1.0, 0.6]]), 0.14, grid)
        assert np.array_equal(two.values, 2.0 * one.values)

    @given(sx=st.integers(-40, 40), sy=st.integers(-20, 20))
    def test_whole_cell_translation_shifts_pattern(self, sx, sy):
        grid = self.make_grid()
        base = np.array([[1.0, 0.6]])
        moved = base + np.array([[sx * grid.dx, sy * grid.dy]])
        f0 = rasterize_particles(base, 0.14, grid).values
        f1 = rasterize_particles(moved, 0.14, grid).values
        assert f1.sum() == f0.sum()
        assert np.array_equal(np.roll(np.roll(f0, sy, axis=0), sx, axis=1), f1)

    def test_center_outside_raises(self):
        grid = self.make_grid()
        with pytest.raises(ValueError):
            rasterize_particles(np.array([[-0.1, 0.6]]), 0.14, grid)

    def test_disk_poking_past_edge_warns(self):
        grid = self.make_grid()
        with pytest.warns(UserWarning):
            rasterize_particles(np.array([[0.02, 0.6]]), 0.14, grid)

    def test_diameter_must_be_positive(self):
        grid = self.make_grid()
        with pytest.raises(ValueError):
            rasterize_particles(np.array([[1.0, 0.6]]), 0.0, grid)


class TestRelativeError:
    def test_exact_match(self):
        assert relative_l2_error(np.ones(5), np.ones(5)) == 0.0

    def test_simple_value(self):
        assert relative_l2_error(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == 1.0

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            relative_l2_error(np.ones(3), np.zeros(3))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            relative_l2_error(np.ones(3), np.ones(4))

    @given(scale=st.floats(1e-6, 1e6))
    def test_scale_invariance(self, scale):
        a = np.array([1.0, 2.0, 3.0])
        b = np.array([1.1, 1.9, 3.2])
        base = relative_l2_error(a, b)
        assert relative_l2_error(scale * a, scale * b) == pytest.approx(base)


class TestLayouts:
    def make_grid(self):
        return build_grid(GridConfig(nx=472, ny=216, lx=4.71, ly=2.15, c=1500.0, nt=2))

    def test_counts(self):
        grid = self.make_grid()
        assert len(make_layout(grid, "top")) == 32
        assert len(make_layout(grid, "top_bottom")) == 64
        assert len(make_layout(grid, "lateral")) == 32
        assert len(make_layout(grid, "all_around")) == 96

    def test_positions_on_boundary(self):
        grid = self.make_grid()
        for ix, iy in make_layout(grid, "all_around").positions:
            assert ix in (0, grid.nx - 1) or iy in (0, grid.ny - 1)

    def test_positions_distinct(self):
        grid = self.make_grid()
        layout = make_layout(grid, "all_around")
        assert len(set(layout.positions)) == len(layout)

    def test_top_row_is_top(self):
        grid = self.make_grid()
        assert all(iy == grid.ny - 1 for _, iy in make_layout(grid, "top").positions)

    def test_custom_layout(self):
        grid = self.make_grid()
        layout = make_layout(grid, "custom", positions=[(3, 5), (7, 9)])
        assert layout.positions == ((3, 5), (7, 9))
        with pytest.raises(ValueError):
            make_layout(grid, "custom", positions=[(grid.nx, 0)])
        with pytest.raises(ValueError):
            make_layout(grid, "custom")

    def test_unknown_tag(self):
        grid = self.make_grid()
        with pytest.raises(ValueError):
            make_layout(grid, "bottom_only")

    def test_duplicate_positions_rejected(self):
        with pytest.raises(ValueError):
            ReceiverLayout(((1, 1), (1, 1)))

    def test_coordinates_are_cell_centers(self):
        grid = self.make_grid()
        layout = make_layout(grid, "custom", positions=[(0, 0)])
        assert layout.coordinates(grid)[0] == pytest.approx(
            [grid.dx / 2, grid.dy / 2]
        )

    def test_dense_edges_fill_every_cell(self):
        grid = build_grid(GridConfig(nx=64, ny=32, lx=1.0, ly=0.5, c=1500.0, nt=2))
        ring = make_layout(grid, "all_around", per_horizontal=64, per_vertical=30)
        assert len(ring) == 2 * 64 + 2 * 30


class TestReceiverData:
    def test_shape_and_times(self):
        data = ReceiverData(np.zeros((3, 5)), dt=0.1)
        assert data.n_receivers == 3 and data.nt == 5
        assert data.times[0] == pytest.approx(0.1)
        assert data.times[-1] == pytest.approx(0.5)

    def test_layout_size_checked(self):
        layout = ReceiverLayout(((0, 0), (1, 0)))
        with pytest.raises(ValueError):
            ReceiverData(np.zeros((3, 5)), dt=0.1, layout=layout)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            ReceiverData(np.zeros((3, 5)), dt=0.0)


class TestSerialization:
    def test_field_round_trip(self, tmp_path):
        grid = build_grid(GridConfig(nx=16, ny=8, lx=1, ly=0.5, c=1, nt=2))
        values = np.arange(128, dtype=float).reshape(8, 16)
        field = DensityField(grid, values)
        raw = save_field(field, tmp_path / "f", kind="density")
        assert raw.suffix == ".f64"
        loaded, header = load_field(tmp_path / "f")
        assert np.array_equal(loaded, values)
        assert header == {
            "kind": "density",
            "nx": 16,
            "ny": 8,
            "dx": grid.dx,
            "dy": grid.dy,
        }

    def test_field_payload_is_little_endian_row_major(self, tmp_path):
        grid = build_grid(GridConfig(nx=4, ny=4, lx=1, ly=1, c=1, nt=2))
        values = np.arange(16, dtype=float).reshape(4, 4)
        raw = save_field(DensityField(grid, values), tmp_path / "g")
        assert raw.read_bytes() == values.astype("<f8").tobytes()

    def test_field_header_mismatch_detected(self, tmp_path):
        grid = build_grid(GridConfig(nx=4, ny=4, lx=1, ly=1, c=1, nt=2))
        save_field(DensityField.zeros(grid), tmp_path / "h")
        sidecar = json.loads((tmp_path / "h.json").read_text())
        sidecar["nx"] = 99
        (tmp_path / "h.json").write_text(json.dumps(sidecar))
        with pytest.raises(ValueError):
            load_field(tmp_path / "h")

    def test_receiver_csv_round_trip(self, tmp_path):
        samples = np.linspace(0, 1, 12).reshape(3, 4)
        data = ReceiverData(samples, dt=0.25)
        path = save_receiver_csv(data, tmp_path / "traces.csv")
        first = path.read_text().splitlines()
        assert first[0].split(",")[0] == "time_s"
        loaded = load_receiver_csv(path)
        assert loaded.dt == pytest.approx(0.25)
        assert np.allclose(loaded.samples, samples)

    def test_receiver_raw_round_trip(self, tmp_path):
        samples = np.random.default_rng(0).standard_normal((5, 9))
        data = ReceiverData(samples, dt=1e-6)
        save_receiver_raw(data, tmp_path / "rx")
        loaded = load_receiver_raw(tmp_path / "rx")
        assert np.array_equal(loaded.samples, samples)
        assert loaded.dt == 1e-6

    def test_sha256_matches_content(self, tmp_path):
        p = tmp_path / "blob.bin"
        p.write_bytes(b"abc")
        assert sha256_of(p) == (
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        )
