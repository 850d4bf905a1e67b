"""Particle detection, frame matching, and dense optical flow."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echoflow.flow import VelocityField, load_velocity_field
from echoflow.grid import DensityField, GridConfig, build_grid, rasterize_particles
from echoflow.velocimetry import (
    DetectedParticles,
    FlowEstimate,
    detect_particles,
    flow_to_hsv_png,
    horn_schunck,
    matching_distances,
    nearest_point_velocities,
    save_dense_flow,
    save_sparse_csv,
    velocity_error,
)


def make_grid(nx=64, ny=32, lx=1.0, ly=0.5):
    return build_grid(GridConfig(nx=nx, ny=ny, lx=lx, ly=ly, c=1500.0, nt=2))


def gaussian_blob(grid, cx, cy, sigma, amplitude=1.0):
    xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
    return amplitude * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))


class TestDetection:
    def test_single_disk_centroid(self):
        grid = make_grid()
        truth = np.array([[0.5, 0.25]])
        frame = rasterize_particles(truth, 0.08, grid)
        found = detect_particles(frame)
        assert len(found) == 1
        assert np.linalg.norm(found.centers[0] - truth[0]) <= grid.dx

    def test_blobs_sorted_by_mass(self):
        grid = make_grid()
        values = gaussian_blob(grid, 0.3, 0.25, 0.02) + 2.0 * gaussian_blob(
            grid, 0.7, 0.25, 0.02
        )
        found = detect_particles(DensityField(grid, values), threshold=0.1)
        assert len(found) == 2
        assert found.masses[0] > found.masses[1]
        assert found.centers[0][0] == pytest.approx(0.7, abs=grid.dx)

    def test_top_keeps_heaviest(self):
        grid = make_grid()
        values = gaussian_blob(grid, 0.3, 0.25, 0.02) + 2.0 * gaussian_blob(
            grid, 0.7, 0.25, 0.02
        )
        found = detect_particles(DensityField(grid, values), threshold=0.1).top(1)
        assert len(found) == 1
        assert found.centers[0][0] == pytest.approx(0.7, abs=grid.dx)

    def test_threshold_splits_touching_blobs(self):
        grid = make_grid()
        values = gaussian_blob(grid, 0.45, 0.25, 0.03) + gaussian_blob(
            grid, 0.55, 0.25, 0.03
        )
        frame = DensityField(grid, values)
        low = detect_particles(frame, threshold=0.2)
        high = detect_particles(frame, threshold=0.9)
        assert len(low) == 1
        assert len(high) == 2

    def test_empty_frame_detects_nothing(self):
        grid = make_grid()
        found = detect_particles(DensityField.zeros(grid))
        assert len(found) == 0

    def test_threshold_validated(self):
        grid = make_grid()
        frame = DensityField.zeros(grid)
        with pytest.raises(ValueError):
            detect_particles(frame, threshold=0.0)
        with pytest.raises(ValueError):
            detect_particles(frame, threshold=1.0)

    def test_four_connectivity_separates_diagonal(self):
        grid = make_grid(nx=8, ny=8, lx=1.0, ly=1.0)
        values = np.zeros(grid.shape)
        values[2, 2] = 1.0
        values[3, 3] = 1.0  # diagonal neighbors stay separate blobs
        found = detect_particles(DensityField(grid, values), threshold=0.5)
        assert len(found) == 2


class TestNearestPoint:
    def detections(self, centers):
        centers = np.asarray(centers, dtype=float)
        return DetectedParticles(centers, np.ones(len(centers)), threshold=0.5)

    def test_translation_recovered_exactly(self):
        first = self.detections([[0.2, 0.2], [0.6, 0.4]])
        second = self.detections([[0.25, 0.2], [0.65, 0.4]])
        est = nearest_point_velocities([first, second], frame_period=0.5)
        assert est.velocities == pytest.approx(np.tile([0.1, 0.0], (2, 1)))
        assert est.points == pytest.approx(np.array([[0.225, 0.2], [0.625, 0.4]]))

    def test_unmatched_extra_detection_dropped(self):
        first = self.detections([[0.2, 0.2]])
        second = self.detections([[0.22, 0.2], [0.9, 0.4]])
        est = nearest_point_velocities([first, second], frame_period=1.0)
        assert est.points.shape == (1, 2)

    def test_three_frames_concatenate(self):
        a = self.detections([[0.2, 0.2]])
        b = self.detections([[0.3, 0.2]])
        c = self.detections([[0.4, 0.2]])
        est = nearest_point_velocities([a, b, c], frame_period=1.0)
        assert est.points.shape == (2, 2)
        assert est.velocities == pytest.approx(np.tile([0.1, 0.0], (2, 1)))

    def test_empty_frame_warns_and_skips(self):
        a = self.detections([[0.2, 0.2]])
        empty = DetectedParticles(np.empty((0, 2)), np.empty(0), 0.5)
        with pytest.warns(UserWarning, match="no detections"):
            with pytest.raises(ValueError):
                nearest_point_velocities([a, empty], frame_period=1.0)

    def test_large_displacement_warns(self):
        # separation is transverse to the motion so matches stay intact
        first = self.detections([[0.2, 0.2], [0.2, 0.4]])
        second = self.detections([[0.32, 0.2], [0.32, 0.4]])
        with pytest.warns(UserWarning, match="ambiguous"):
            nearest_point_velocities([first, second], frame_period=1.0)

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            nearest_point_velocities([self.detections([[0.1, 0.1]])], 1.0)

    @given(seed=st.integers(0, 2**31 - 1))
    def test_detection_order_is_irrelevant(self, seed):
        import warnings as _warnings

        rng = np.random.default_rng(seed)
        base = rng.uniform(0.1, 0.9, size=(5, 2))
        moved = base + np.array([0.02, -0.01])
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")  # close draws may flag ambiguity
            est_a = nearest_point_velocities(
                [self.detections(base), self.detections(moved)], 1.0
            )
            perm = rng.permutation(5)
            est_b = nearest_point_velocities(
                [self.detections(base[perm]), self.detections(moved)], 1.0
            )
        rows_a = np.lexsort((est_a.points[:, 1], est_a.points[:, 0]))
        rows_b = np.lexsort((est_b.points[:, 1], est_b.points[:, 0]))
        assert np.allclose(est_a.points[rows_a], est_b.points[rows_b])
        assert np.allclose(est_a.velocities[rows_a], est_b.velocities[rows_b])


class TestHornSchunck:
    def shifted_frames(self, grid, shift_cells=1):
        f1 = gaussian_blob(grid, 0.45, 0.25, 3 * grid.dx)
        f2 = gaussian_blob(grid, 0.45 + shift_cells * grid.dx, 0.25, 3 * grid.dx)
        return DensityField(grid, f1), DensityField(grid, f2)

    def test_one_cell_shift_recovered(self):
        grid = make_grid()
        a, b = self.shifted_frames(grid)
        period = 0.1
        est = horn_schunck(a, b, period, alpha=0.5, iterations=200)
        displacement = np.median(est.u[est.observable]) * period / grid.dx
        assert 0.7 <= displacement <= 1.3
        assert np.abs(np.median(est.v[est.observable])) * period / grid.dx <= 0.2

    def test_energy_non_increasing(self):
        grid = make_grid()
        a, b = self.shifted_frames(grid)
        est = horn_schunck(a, b, 0.1, iterations=60)
        energies = est.energies
        assert len(energies) == 61
        assert all(e2 <= e1 * (1 + 1e-12) for e1, e2 in zip(energies, energies[1:]))

    def test_intensity_scaling_with_matched_alpha(self):
        grid = make_grid()
        a, b = self.shifted_frames(grid)
        base = horn_schunck(a, b, 0.1, alpha=0.5, iterations=80)
        doubled = horn_schunck(
            DensityField(grid, 2.0 * a.values),
            DensityField(grid, 2.0 * b.values),
            0.1,
            alpha=1.0,
            iterations=80,
        )
        scale = np.abs(base.u).max()
        assert np.abs(base.u - doubled.u).max() <= 1e-6 * scale
        assert np.abs(base.v - doubled.v).max() <= 1e-6 * scale

    def test_identical_frames_give_zero_flow(self):
        grid = make_grid()
        a, _ = self.shifted_frames(grid)
        est = horn_schunck(a, a.copy(), 0.1, iterations=40)
        assert np.abs(est.u).max() == pytest.approx(0.0, abs=1e-15)
        assert np.abs(est.v).max() == pytest.approx(0.0, abs=1e-15)

    def test_observable_tracks_mass(self):
        grid = make_grid()
        a, b = self.shifted_frames(grid)
        est = horn_schunck(a, b, 0.1, iterations=10)
        assert est.observable.any()
        assert not est.observable.all()
        assert est.observable[16, 29]  # the blob itself
        assert not est.observable[2, 2]  # far corner

    def test_presmoothing_keeps_flow_finite(self):
        grid = make_grid()
        a, b = self.shifted_frames(grid)
        est = horn_schunck(a, b, 0.1, iterations=20, presmooth_sigma=1.5)
        assert np.isfinite(est.u).all() and np.isfinite(est.v).all()

    def test_validation(self):
        grid = make_grid()
        other = make_grid(nx=32, ny=16)
        a, b = self.shifted_frames(grid)
        with pytest.raises(ValueError):
            horn_schunck(a, DensityField.zeros(other), 0.1)
        with pytest.raises(ValueError):
            horn_schunck(a, b, -0.1)
        with pytest.raises(ValueError):
            horn_schunck(a, b, 0.1, alpha=0.0)
        with pytest.raises(ValueError):
            horn_schunck(a, b, 0.1, refinements=-1)

    def test_refinements_reduce_multi_cell_bias(self):
        # the linearized data term undershoots once the shift passes a
        # cell; warped refinement passes must claw back a good part of it
        grid = make_grid()
        a, b = self.shifted_frames(grid, shift_cells=3)
        period = 0.1
        target = 3 * grid.dx / period

        def median_error(est):
            return abs(np.median(est.u[est.observable]) - target)

        single = horn_schunck(a, b, period, alpha=1.0, iterations=200)
        refined = horn_schunck(a, b, period, alpha=1.0, iterations=200, refinements=2)
        assert median_error(refined) < 0.8 * median_error(single)
        assert median_error(refined) <= 0.18 * target

    def test_refinements_keep_energy_contract(self):
        grid = make_grid()
        a, b = self.shifted_frames(grid, shift_cells=2)
        est = horn_schunck(a, b, 0.1, alpha=1.0, iterations=30, refinements=2)
        assert len(est.energies) == 31
        assert all(e2 <= e1 * (1 + 1e-12) for e1, e2 in zip(est.energies, est.energies[1:]))


class TestErrorsAndExports:
    def test_flow_estimate_is_sparse_xor_dense(self):
        with pytest.raises(ValueError):
            FlowEstimate(frame_period=1.0)
        with pytest.raises(ValueError):
            FlowEstimate(
                frame_period=1.0,
                points=np.zeros((1, 2)),
                velocities=np.zeros((1, 2)),
                u=np.zeros((2, 2)),
                v=np.zeros((2, 2)),
            )

    def test_sparse_error_against_uniform_truth(self):
        truth = VelocityField.uniform((0.2, 0.0), 1.0, 1.0)
        est = FlowEstimate(
            frame_period=1.0,
            points=np.array([[0.5, 0.5], [0.2, 0.8]]),
            velocities=np.array([[0.2, 0.0], [0.2, 0.0]]),
        )
        assert velocity_error(est, truth) == pytest.approx(0.0, abs=1e-15)
        half = FlowEstimate(
            frame_period=1.0,
            points=est.points,
            velocities=0.5 * est.velocities,
        )
        assert velocity_error(half, truth) == pytest.approx(0.5)

    def test_dense_error_uses_observable_mask(self):
        grid = make_grid()
        truth = VelocityField.uniform((1.0, 0.0), grid.lx, grid.ly)
        u = np.zeros(grid.shape)
        observable = np.zeros(grid.shape, dtype=bool)
        observable[10:20, 20:40] = True
        u[observable] = 1.0  # perfect inside the mask, zero outside
        est = FlowEstimate(
            frame_period=1.0,
            u=u,
            v=np.zeros(grid.shape),
            grid=grid,
            observable=observable,
        )
        assert velocity_error(est, truth) == pytest.approx(0.0, abs=1e-15)
        full = np.ones(grid.shape, dtype=bool)
        assert velocity_error(est, truth, mask=full) > 0.5

    def test_mean_velocity_region(self):
        grid = make_grid()
        u = np.ones(grid.shape)
        v = -np.ones(grid.shape)
        est = FlowEstimate(frame_period=1.0, u=u, v=v, grid=grid)
        assert est.mean_velocity() == pytest.approx([1.0, -1.0])
        region = np.zeros(grid.shape, dtype=bool)
        with pytest.raises(ValueError):
            est.mean_velocity(region)

    def test_at_points_exact_on_linear_field(self):
        # bilinear interpolation reproduces affine fields between centers
        grid = make_grid()
        xx, yy = np.meshgrid(grid.x_centers, grid.y_centers)
        est = FlowEstimate(frame_period=1.0, u=2.0 * xx + 1.0, v=-yy, grid=grid)
        pts = np.array([[0.31, 0.17], [0.66, 0.40], [0.505, 0.25]])
        sampled = est.at_points(pts)
        assert sampled[:, 0] == pytest.approx(2.0 * pts[:, 0] + 1.0, rel=1e-12)
        assert sampled[:, 1] == pytest.approx(-pts[:, 1], rel=1e-12)

    def test_at_points_clamps_outside_and_validates(self):
        grid = make_grid()
        est = FlowEstimate(frame_period=1.0, u=np.full(grid.shape, 3.0),
                           v=np.zeros(grid.shape), grid=grid)
        sampled = est.at_points([[-5.0, 0.2], [9.0, 9.0]])
        assert sampled[:, 0] == pytest.approx([3.0, 3.0])
        sparse = FlowEstimate(frame_period=1.0, points=np.zeros((1, 2)),
                              velocities=np.zeros((1, 2)))
        with pytest.raises(ValueError):
            sparse.at_points([[0.1, 0.1]])
        gridless = FlowEstimate(frame_period=1.0, u=np.zeros(grid.shape),
                                v=np.zeros(grid.shape))
        with pytest.raises(ValueError):
            gridless.at_points([[0.1, 0.1]])

    def test_matching_distances_optimal_assignment(self):
        truth = np.array([[0.0, 0.0], [1.0, 0.0]])
        found = np.array([[1.02, 0.0], [0.01, 0.0]])
        d = matching_distances(found, truth)
        assert sorted(d) == pytest.approx([0.01, 0.02])

    def test_matching_distances_unequal_counts(self):
        truth = np.array([[0.0, 0.0], [1.0, 0.0]])
        found = np.array([[0.1, 0.0]])
        d = matching_distances(found, truth)
        assert len(d) == 1
        assert d[0] == pytest.approx(0.1)

    def test_sparse_csv_format(self, tmp_path):
        est = FlowEstimate(
            frame_period=1.0,
            points=np.array([[0.5, 0.25]]),
            velocities=np.array([[0.125, -0.5]]),
        )
        path = save_sparse_csv(est, tmp_path / "flow.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,u,v"
        assert lines[1] == "0.5,0.25,0.125,-0.5"

    def test_dense_flow_round_trip(self, tmp_path):
        grid = make_grid()
        rng = np.random.default_rng(1)
        est = FlowEstimate(
            frame_period=1.0,
            u=rng.standard_normal(grid.shape),
            v=rng.standard_normal(grid.shape),
            grid=grid,
        )
        save_dense_flow(est, tmp_path / "dense")
        loaded = load_velocity_field(tmp_path / "dense")
        assert np.array_equal(loaded.samples[0, :, :, 0], est.u)
        assert np.array_equal(loaded.samples[0, :, :, 1], est.v)

    def test_hsv_png_written(self, tmp_path):
        grid = make_grid()
        est = FlowEstimate(
            frame_period=1.0,
            u=np.ones(grid.shape),
            v=np.zeros(grid.shape),
            grid=grid,
            observable=np.ones(grid.shape, dtype=bool),
        )
        path = flow_to_hsv_png(est, tmp_path / "flow.png")
        header = path.read_bytes()[:8]
        assert header == b"\x89PNG\r\n\x1a\n"
        from PIL import Image

        with Image.open(path) as img:
            assert img.size == (grid.nx, grid.ny)
            r, g, b = img.getpixel((5, 5))
            assert r > 200 and g < 80 and b < 80  # rightward flow renders red
