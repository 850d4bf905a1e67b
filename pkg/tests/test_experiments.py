"""Experiment presets: config handling, layouts, reports, CLI, smoke runs."""

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from echoflow import cli
from echoflow.experiments import (
    LAYOUT_CHOICES,
    PROFILES,
    ExperimentConfig,
    draw_particles,
    emit_artifacts,
    min_resolvable_frequency,
    run_example1,
    run_example2,
    run_example3,
    run_karman,
    run_vortex,
    sensing_array,
    write_report,
)
from echoflow.flow import save_velocity_field, vortex_street
from echoflow.grid import GridConfig, build_grid, sha256_of


def smoke_config(**overrides) -> ExperimentConfig:
    """Small tank, short pulse, tight solver budget: seconds, not minutes."""
    base = dict(
        nx=64,
        ny=32,
        lx=1.0,
        ly=0.5,
        q0=20e3,
        per_horizontal=32,
        per_vertical=14,
        n_particles=2,
        diameter=0.12,
        margin=0.15,
        min_separation=0.3,
        iterations=40,
        seed=3,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def example1_report():
    return run_example1(smoke_config())


@pytest.fixture(scope="module")
def tank():
    return build_grid(GridConfig(nx=64, ny=32, lx=1.0, ly=0.5, c=1500.0, nt=8))


@pytest.fixture(scope="module")
def flow_smoke():
    return smoke_config(
        n_particles=3,
        margin=0.1,
        min_separation=0.25,
        frame_period=0.5,
        advect_substeps=16,
        hs_iterations=60,
    )


class TestConfig:
    def test_defaults_are_valid(self):
        config = ExperimentConfig()
        assert config.profile == "desk"
        assert config.layout == "array"
        assert config.layout in LAYOUT_CHOICES

    def test_yaml_round_trip(self, tmp_path):
        config = smoke_config(flow_kind="uniform", flow_value=[0.2, -0.1])
        path = config.to_yaml(tmp_path / "run.yaml")
        assert ExperimentConfig.from_yaml(path) == config

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: 1\nq_zero: 10.0\n")
        with pytest.raises(ValueError, match="q_zero"):
            ExperimentConfig.from_yaml(path)

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="mapping"):
            ExperimentConfig.from_yaml(path)

    def test_validation(self):
        with pytest.raises(ValueError, match="profile"):
            ExperimentConfig(profile="bench")
        with pytest.raises(ValueError, match="layout"):
            ExperimentConfig(layout="everywhere")
        with pytest.raises(ValueError, match="q0"):
            ExperimentConfig(q0=0.0)
        with pytest.raises(ValueError, match="particle"):
            ExperimentConfig(n_particles=0)
        with pytest.raises(ValueError, match="diameter"):
            ExperimentConfig(diameter=-0.1)
        with pytest.raises(ValueError, match="iteration"):
            ExperimentConfig(iterations=0)
        with pytest.raises(ValueError, match="noise"):
            ExperimentConfig(sigma=-0.1)
        with pytest.raises(ValueError, match="frame"):
            ExperimentConfig(n_frames=0)
        with pytest.raises(ValueError, match="schedule"):
            ExperimentConfig(frame_period=0.0)
        with pytest.raises(ValueError, match="refinement"):
            ExperimentConfig(hs_refinements=-1)
        with pytest.raises(ValueError, match="schedule"):
            ExperimentConfig(advect_substeps=0)

    def test_profiles_resolve(self):
        assert ExperimentConfig().resolved() == (236, 108, 118, 53)
        assert ExperimentConfig(profile="paper").resolved() == (472, 216, 32, 16)
        assert ExperimentConfig(nx=100, per_vertical=9).resolved() == (100, 108, 118, 9)
        assert set(PROFILES) == {"desk", "paper"}

    def test_build_uses_the_resolved_size(self):
        grid = smoke_config().build()
        assert (grid.nx, grid.ny) == (64, 32)
        timed = smoke_config().build(duration=100 * grid.dt)
        assert timed.nt == 100

    def test_signal_kind(self):
        assert smoke_config().signal().q0 == 20e3
        with pytest.raises(ValueError, match="signal"):
            smoke_config(signal_kind="chirp").signal()

    def test_min_resolvable_frequency(self):
        # c / (2 d): half a wavelength across the particle
        assert min_resolvable_frequency(0.14) == pytest.approx(
            5357.142857142857, rel=1e-12
        )
        assert min_resolvable_frequency(0.5, c=1000.0) == pytest.approx(1000.0)
        with pytest.raises(ValueError):
            min_resolvable_frequency(0.0)


class TestDrawParticles:
    def test_margins_and_separation(self):
        config = ExperimentConfig(n_particles=10)
        centers = draw_particles(config, np.random.default_rng(7))
        assert centers.shape == (10, 2)
        assert np.all(centers >= config.margin)
        assert np.all(centers[:, 0] <= config.lx - config.margin)
        assert np.all(centers[:, 1] <= config.ly - config.margin)
        diff = centers[:, None] - centers[None, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= config.min_separation

    def test_same_seed_same_draw(self):
        config = ExperimentConfig(n_particles=5)
        a = draw_particles(config, np.random.default_rng(11))
        b = draw_particles(config, np.random.default_rng(11))
        assert np.array_equal(a, b)

    def test_explicit_centers_pass_through(self):
        config = ExperimentConfig(n_particles=2, centers=[[1.0, 1.0], [2.0, 1.5]])
        assert np.array_equal(
            draw_particles(config, np.random.default_rng(0)),
            [[1.0, 1.0], [2.0, 1.5]],
        )

    def test_explicit_centers_must_match_count(self):
        config = ExperimentConfig(n_particles=3, centers=[[1.0, 1.0]])
        with pytest.raises(ValueError, match="n_particles"):
            draw_particles(config, np.random.default_rng(0))

    def test_margin_leaving_no_room_rejected(self):
        config = smoke_config(margin=0.3)  # 0.3 from each wall of a 0.5 m height
        config = dataclasses.replace(config, ly=0.5, margin=0.3)
        with pytest.raises(ValueError, match="room"):
            draw_particles(config, np.random.default_rng(0))

    def test_unplaceable_separation_gives_up(self):
        config = smoke_config(min_separation=5.0)
        with pytest.raises(RuntimeError, match="separation"):
            draw_particles(config, np.random.default_rng(0))


class TestSensingArray:
    def test_ring_plus_lattice_count(self, tank):
        layout = sensing_array(tank)
        # 2*64 + 2*30 boundary cells, plus an 8 x 4 stride-8 lattice
        assert len(layout) == 220
        assert layout.tag == "custom"
        assert len(set(layout.positions)) == len(layout)

    def test_boundary_fully_covered(self, tank):
        positions = set(sensing_array(tank).positions)
        assert {(0, 0), (63, 0), (0, 31), (63, 31), (30, 0), (0, 15)} <= positions

    def test_lattice_inset_from_the_walls(self, tank):
        positions = set(sensing_array(tank).positions)
        assert {(4, 4), (12, 12), (60, 28)} <= positions
        assert not {(1, 1), (2, 2), (3, 5), (4, 3)} & positions

    def test_stride_controls_density(self, tank):
        assert len(sensing_array(tank, stride=4)) > len(sensing_array(tank, stride=8))

    def test_validation(self, tank):
        with pytest.raises(ValueError, match="stride"):
            sensing_array(tank, stride=0)
        with pytest.raises(ValueError, match="stride"):
            sensing_array(tank, inset=0)


class TestReports:
    def test_write_report_strips_volatile_keys(self, tmp_path):
        report = {
            "a": 1,
            "wall_time_s": 3.5,
            "files": ["x.f64"],
            "nested": {"wall_time_s": 1.0, "b": 2},
            "runs": [{"files": [], "c": 3}],
        }
        path = write_report(report, tmp_path / "report.json")
        loaded = json.loads(path.read_text())
        assert loaded == {"a": 1, "nested": {"b": 2}, "runs": [{"c": 3}]}

    def test_emit_artifacts_manifest(self, tmp_path):
        f1 = tmp_path / "b.bin"
        f2 = tmp_path / "a.bin"
        f1.write_bytes(b"one")
        f2.write_bytes(b"two")
        report = {"name": "t", "files": [str(f1), str(f2)]}
        manifest = emit_artifacts(report, tmp_path)
        assert manifest["n_files"] == 2
        assert [e["path"] for e in manifest["files"]] == ["a.bin", "b.bin"]
        for entry in manifest["files"]:
            assert entry["sha256"] == sha256_of(tmp_path / entry["path"])
            assert entry["bytes"] == 3
        assert json.loads((tmp_path / "manifest.json").read_text()) == manifest
        assert (tmp_path / "report.json").exists()

    def test_emit_artifacts_missing_file(self, tmp_path):
        report = {"files": [str(tmp_path / "gone.f64")]}
        with pytest.raises(FileNotFoundError):
            emit_artifacts(report, tmp_path)


class TestFrozenFrameRuns:
    def test_example1_report(self, example1_report):
        report = example1_report
        assert report["name"] == "example1_q20000"
        assert report["n_receivers"] == 220  # ring of 188 plus the 8 x 4 lattice
        assert report["layout"] == "array"
        assert report["solver"]["iterations"] == 40
        assert len(report["solver"]["residual_norms"]) == 41
        assert len(report["true_centers"]) == 2
        assert 0.0 < report["relative_l2_error"] < 0.5
        assert report["min_resolvable_frequency_hz"] == pytest.approx(1500.0 / 0.24)

    def test_example1_is_deterministic(self, example1_report):
        again = run_example1(smoke_config())
        assert again["relative_l2_error"] == example1_report["relative_l2_error"]
        assert again["true_centers"] == example1_report["true_centers"]
        assert again["solver"]["residual_norms"] == example1_report["solver"]["residual_norms"]

    def test_example1_artifacts(self, tmp_path):
        report = run_example1(smoke_config(iterations=2), out_dir=tmp_path)
        manifest = emit_artifacts(report, tmp_path)
        names = {e["path"] for e in manifest["files"]}
        assert names == {
            "example1_q20000_truth.f64",
            "example1_q20000_truth.json",
            "example1_q20000_recon.f64",
            "example1_q20000_recon.json",
            "example1_q20000_data.f64",
            "example1_q20000_data.json",
            "example1_q20000_recon.png",
            "example1_q20000_residuals.csv",
        }
        lines = (tmp_path / "example1_q20000_residuals.csv").read_text().splitlines()
        assert lines[0] == "iteration,residual"
        assert len(lines) == 4  # header, start residual, one per iteration

    def test_example2_splits_the_error_by_height(self):
        report = run_example2(smoke_config(), "top")
        assert report["n_receivers"] == 32
        # receivers only along the surface: the far (bottom) half fares worse
        assert report["bottom_half_error"] > report["top_half_error"] > 0.0

    def test_example3_localization_fields(self):
        report = run_example3(smoke_config(), sigma=0.2)
        assert report["sigma"] == 0.2
        assert report["n_detected"] == len(report["localization_distances"])
        assert isinstance(report["localized_within_diameter"], bool)
        assert report["max_localization_distance"] is None or (
            report["max_localization_distance"] >= 0.0
        )


class TestFlowRuns:
    def test_vortex_run(self, flow_smoke):
        report = run_vortex(
            dataclasses.replace(flow_smoke, flow_kind="taylor_green", flow_amplitude=0.05)
        )
        assert report["n_matches"] == 3
        assert len(report["frames"]) == 2
        assert all(f["n_seeded"] == 3 for f in report["frames"])
        assert report["trajectory_active_counts"] == [3, 3]
        assert 0.0 < report["nearest_point_error"] < 1.0
        assert np.isfinite(report["optical_flow_error"])

    def test_vortex_defaults_to_the_cellular_flow(self, flow_smoke):
        # flow_kind "none" is a plain reconstruction config; the vortex
        # preset swaps in its own analytic field rather than failing
        report = run_vortex(dataclasses.replace(flow_smoke, flow_amplitude=0.05))
        assert report["config"]["flow_kind"] == "taylor_green"

    def test_karman_run(self, flow_smoke, tmp_path):
        street = vortex_street(1.0, 0.5, 64, 32, mean_speed=0.05, vortex_strength=0.03)
        field_path = save_velocity_field(street, tmp_path / "street")
        report = run_karman(flow_smoke, field_path=field_path, out_dir=tmp_path)
        assert report["config"]["flow_kind"] == "sampled"
        comparison = report["vadcp"]
        assert sorted(comparison) == [
            "exact_avg",
            "inverse_avg",
            "inverse_rel_err",
            "vadcp_avg",
            "vadcp_rel_err",
        ]
        assert comparison["vadcp_rel_err"] >= 0.0
        assert np.isfinite(report["optical_flow_error"])
        for name in ("karman_dense.png", "karman_cells.png", "karman_vadcp.json"):
            assert (tmp_path / name).exists()

    def test_karman_checks_the_field_extent(self, flow_smoke, tmp_path):
        street = vortex_street(2.0, 0.5, 64, 32, mean_speed=0.05)
        field_path = save_velocity_field(street, tmp_path / "wide")
        with pytest.raises(ValueError, match="extent"):
            run_karman(flow_smoke, field_path=field_path)


class TestCli:
    def test_parser_covers_the_presets(self):
        parser = cli.build_parser()
        args = parser.parse_args(["example1", "--q0", "1000"])
        assert args.command == "example1" and args.q0 == 1000.0
        args = parser.parse_args(["example2", "--layout", "array"])
        assert args.layout == "array"
        args = parser.parse_args(["example3", "--sigma", "0.2"])
        assert args.sigma == 0.2
        for command in (["vortex"], ["karman", "--field", "f"], ["vadcp-compare", "--field", "f"]):
            assert parser.parse_args(command).command == command[0]

    def test_required_arguments_enforced(self):
        parser = cli.build_parser()
        with pytest.raises(SystemExit):
            parser.parse_args(["example1"])
        with pytest.raises(SystemExit):
            parser.parse_args(["example2", "--layout", "sideways"])

    def test_load_config_applies_overrides(self, tmp_path):
        path = smoke_config().to_yaml(tmp_path / "run.yaml")
        parser = cli.build_parser()
        args = parser.parse_args(
            ["example1", "--q0", "1000", "--config", str(path),
             "--seed", "42", "--profile", "paper", "--out", str(tmp_path / "out")]
        )
        config = cli.load_config(args)
        assert config.seed == 42
        assert config.profile == "paper"
        assert config.out_dir == str(tmp_path / "out")
        assert config.q0 == 20e3  # --q0 applies at run time, not in the config

    def test_main_runs_a_preset(self, tmp_path, capsys):
        path = smoke_config(iterations=2).to_yaml(tmp_path / "run.yaml")
        out = tmp_path / "artifacts"
        code = cli.main(
            ["example1", "--q0", "20000", "--config", str(path), "--out", str(out)]
        )
        assert code == 0
        shown = json.loads(capsys.readouterr().out)
        assert shown["name"] == "example1_q20000"
        assert "files" not in shown
        assert (out / "manifest.json").exists()
        assert (out / "report.json").exists()

    def test_main_reports_errors_as_json(self, tmp_path, capsys):
        code = cli.main(
            ["example1", "--q0", "1000", "--config", str(tmp_path / "missing.yaml")]
        )
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "FileNotFoundError"
