"""Pipeline orchestration, reports, config files, and the CLI surface."""

import math
from dataclasses import replace

import numpy as np
import pytest

from pilevol.cli import main as cli_main
from pilevol.cloud import AxisRange, PointCloud
from pilevol.config import parse_config_text
from pilevol.errors import ConfigError, EmptyCloud
from pilevol.pipeline import (
    PipelineConfig,
    bench_csv,
    bench_reference,
    compression_sweep,
    emit_histogram,
    run_pipeline,
    run_report_csv,
    sweep_csv,
)
from pilevol.synth import (
    Cone,
    SceneSpec,
    default_clutter,
    generate_scene,
    reference_scenes,
)

# one small catalogue-like scene reused across tests (cheap to process)
SMALL_SPEC = SceneSpec(
    pile=Cone(0.24, 3 * 0.014 / (math.pi * 0.24 ** 2)),
    footprint_area=1.3,
    ground_extent=(math.sqrt(2.6), math.sqrt(2.6) / 2),
    point_density=9000.0,
    noise_sigma=0.005,
    tilt_deg=8.0,
    clutter=default_clutter((math.sqrt(2.6), math.sqrt(2.6) / 2)),
    seed=424,
    scene_id="small-test-cone",
)


@pytest.fixture(scope="module")
def small_scene():
    return generate_scene(SMALL_SPEC)


def test_run_pipeline_reference_accuracy(small_scene):
    report = run_pipeline(PipelineConfig(seed=3), scene=small_scene)
    assert report.estimates[0].method == "COLUMN_GRID"
    assert abs(report.relative_error) <= 0.05
    counts = [report.stage_counts[s] for s in
              ("passthrough", "downsample", "prefilter", "posture",
               "calibration", "fine_filter")]
    assert counts == sorted(counts, reverse=True)
    assert report.ground is not None
    assert report.ground.mode == "FIRST_PEAK"


def test_disabled_stages_pass_through(small_scene):
    cfg = PipelineConfig(seed=3, enable_prefilter=False, enable_posture=False,
                         enable_calibration=False, enable_fine_filter=False)
    report = run_pipeline(cfg, scene=small_scene)
    n = len(small_scene.cloud)
    assert all(count == n for count in report.stage_counts.values())
    assert report.ground is None


def test_calibration_without_posture_flags_dependency(small_scene):
    cfg = PipelineConfig(seed=3, enable_posture=False)
    report = run_pipeline(cfg, scene=small_scene)
    assert any("posture" in w for w in report.warnings)


def test_report_csv_deterministic(small_scene):
    cfg = PipelineConfig(seed=11)
    a = run_report_csv(run_pipeline(cfg, scene=small_scene))
    b = run_report_csv(run_pipeline(cfg, scene=small_scene))
    assert a == b
    assert "volume_m3" in a and "count_prefilter" in a


def test_pipeline_passthrough_ranges(small_scene):
    lo, hi = -0.2, 0.2
    cfg = PipelineConfig(seed=3, passthrough_ranges=(AxisRange("X", lo, hi),),
                         enable_prefilter=False, enable_posture=False,
                         enable_calibration=False, enable_fine_filter=False)
    report = run_pipeline(cfg, scene=small_scene)
    expected = int(np.count_nonzero(
        (small_scene.cloud.xyz[:, 0] >= lo) & (small_scene.cloud.xyz[:, 0] <= hi)))
    assert report.stage_counts["passthrough"] == expected


def test_pipeline_empty_input():
    with pytest.raises(EmptyCloud):
        run_pipeline(PipelineConfig(), cloud=PointCloud.empty())


def test_pipeline_config_validation():
    with pytest.raises(ConfigError):
        run_pipeline(PipelineConfig(estimator="NOT_A_METHOD"),
                     cloud=PointCloud([[0, 0, 0]]))
    with pytest.raises(ConfigError):
        PipelineConfig(ground_mode="OVERRIDE").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(smooth_step=4).validate()
    with pytest.raises(ConfigError):
        run_pipeline(PipelineConfig(), )        # no cloud, no scene


def test_uniform_estimator_needs_scene_area(small_scene):
    cfg = PipelineConfig(seed=3, estimator="COLUMN_UNIFORM")
    report = run_pipeline(cfg, scene=small_scene)   # area from the scene spec
    assert report.estimates[0].method == "COLUMN_UNIFORM"
    cloud_only = small_scene.cloud
    with pytest.raises(ConfigError):
        run_pipeline(cfg, cloud=cloud_only)


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def test_bench_single_round_rows():
    specs = [SMALL_SPEC]
    rows = bench_reference(specs, rounds=1)
    assert len(rows) == 1
    row = rows[0]
    assert row.status == "OK"
    assert row.error_variance is None
    csv = bench_csv(rows)
    lines = csv.strip().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[7] == ""      # variance column blank


def test_bench_failed_scene_row_marked():
    # a nearly empty scene starves the plane fit; the bench must keep going
    broken = SceneSpec(pile=Cone(0.05, 0.05), footprint_area=0.04,
                       ground_extent=(0.2, 0.2), point_density=200.0,
                       noise_sigma=0.0, tilt_deg=0.0, seed=1,
                       scene_id="broken")
    rows = bench_reference([broken, SMALL_SPEC], rounds=1)
    assert rows[0].status.startswith("FAILED")
    assert rows[1].status == "OK"
    csv = bench_csv(rows)
    assert "FAILED" in csv


def test_bench_multi_round_variance():
    rows = bench_reference([SMALL_SPEC], rounds=3)
    assert rows[0].error_variance is not None
    assert rows[0].rounds == 3
    assert len(rows[0].errors) == 3


# ---------------------------------------------------------------------------
# compression sweep
# ---------------------------------------------------------------------------

def test_sweep_identity_and_monotone_ratio():
    spec = replace(SMALL_SPEC, clutter=(), tilt_deg=0.0, scene_id="sweep-test")
    rows = compression_sweep(spec, [1e-5, 0.02, 0.05])
    assert rows[0].voxel_size == 0.0             # origin row first
    ratios = [r.compressed_ratio for r in rows]
    assert ratios[0] == 1.0
    assert ratios[1] == 1.0                      # voxel below any pair spacing
    # downsampling below the point spacing reproduces the origin exactly
    assert rows[1].mean_error == pytest.approx(rows[0].mean_error, abs=1e-12)
    assert ratios == sorted(ratios, reverse=True)
    csv = sweep_csv(rows)
    assert csv.splitlines()[0] == "voxel_size_m,compressed_ratio,mean_error"


def test_sweep_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        compression_sweep(SMALL_SPEC, [0.05, 0.01])
    with pytest.raises(ConfigError):
        compression_sweep(SMALL_SPEC, [-0.1])


def test_downsampling_scales_filter_radius_and_grid_cell():
    cfg = PipelineConfig()
    assert cfg.effective_radius_params() is cfg.radius_params
    assert cfg.effective_grid() is cfg.grid
    coarse = replace(cfg, downsample_voxel=0.05)
    assert coarse.effective_radius_params().r0 == pytest.approx(0.11)
    assert coarse.effective_radius_params().n_min == cfg.radius_params.n_min
    assert coarse.effective_grid().cell_size == pytest.approx(0.08)
    fine = replace(cfg, downsample_voxel=0.001)
    assert fine.effective_radius_params().r0 == cfg.radius_params.r0
    assert fine.effective_grid().cell_size == cfg.grid.cell_size


# ---------------------------------------------------------------------------
# histogram artifact
# ---------------------------------------------------------------------------

def test_emit_histogram_csv(small_scene):
    cfg = PipelineConfig(seed=3)
    csv_text, ground = emit_histogram(cfg, scene=small_scene)
    lines = csv_text.strip().splitlines()
    assert lines[0] == "bin_center_m,count,is_ground"
    # retained bins: n_interval minus the smoothing trim
    assert len(lines) - 1 == cfg.n_interval - (cfg.smooth_step - 1)
    marks = [i for i, line in enumerate(lines[1:]) if line.endswith(",1")]
    assert len(marks) == 1
    centers = [float(line.split(",")[0]) for line in lines[1:]]
    bin_width = centers[1] - centers[0]
    # marked ground sits within a bin of the detected height
    assert abs(centers[marks[0]] - ground.height) <= bin_width


def test_emit_histogram_override_marker(small_scene):
    cfg = PipelineConfig(seed=3, ground_mode="OVERRIDE", override_height=0.1)
    csv_text, ground = emit_histogram(cfg, scene=small_scene)
    assert ground.height == 0.1
    lines = csv_text.strip().splitlines()[1:]
    marked = [line for line in lines if line.endswith(",1")]
    assert len(marked) == 1


def test_emit_histogram_empty_cloud():
    with pytest.raises(EmptyCloud):
        emit_histogram(PipelineConfig(), cloud=PointCloud.empty())


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def test_config_text_round_trip():
    text = """
# comment
[pipeline]
seed = 9
prefilter = off
downsample_voxel = 0.02

[passthrough]
x = -1.0, 1.0
z = , 2.0

[filter]
r0 = 0.03
min_cluster_size = 40

[ransac]
distance_threshold = 0.02

[ground]
mode = MID_PLATEAU
margin = 0.02

[volume]
estimator = COLUMN_GRID
cell_size = 0.04
aggregator = MAX
"""
    cfg = parse_config_text(text)
    assert cfg.seed == 9 and cfg.ransac.seed == 9
    assert cfg.enable_prefilter is False
    assert cfg.downsample_voxel == 0.02
    assert len(cfg.passthrough_ranges) == 2
    assert cfg.passthrough_ranges[1].hi == 2.0
    assert cfg.radius_params.r0 == 0.03
    assert cfg.hdbscan_params.min_cluster_size == 40
    assert cfg.ransac.distance_threshold == 0.02
    assert cfg.ground_mode == "MID_PLATEAU"
    assert cfg.margin == 0.02
    assert cfg.grid.cell_size == 0.04
    assert cfg.grid.aggregator == "MAX"


def test_config_unknown_key_fails_fast():
    with pytest.raises(ConfigError):
        parse_config_text("[pipeline]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("[nowhere]\nseed = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("seed 1\n")


def test_config_value_validation():
    with pytest.raises(ConfigError):
        parse_config_text("[ground]\nstep = 4\n")
    with pytest.raises(ConfigError):
        parse_config_text("[pipeline]\nseed = many\n")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_synth_run_histogram(tmp_path):
    scene_id = reference_scenes()[0].scene_id
    assert cli_main(["synth", "--scene-id", scene_id, "--out", str(tmp_path),
                     "--format", "xyz"]) == 0
    cloud_file = tmp_path / f"{scene_id}.xyz"
    sidecar = tmp_path / f"{scene_id}.scene.txt"
    assert cloud_file.exists() and sidecar.exists()
    assert "true_volume_m3" in sidecar.read_text()

    assert cli_main(["run", "--input", str(cloud_file), "--out", str(tmp_path),
                     "--truth", "0.014"]) == 0
    report = (tmp_path / "report.csv").read_text()
    assert "relative_error" in report

    assert cli_main(["histogram", "--scene-id", scene_id, "--out",
                     str(tmp_path), "--svg"]) == 0
    assert (tmp_path / "histogram.csv").exists()
    assert (tmp_path / "histogram.svg").exists()


def test_cli_exit_codes(tmp_path):
    bad_cfg = tmp_path / "bad.ini"
    bad_cfg.write_text("junk = 1\n")
    scene_id = reference_scenes()[0].scene_id
    assert cli_main(["run", "--scene-id", scene_id, "--config", str(bad_cfg),
                     "--out", str(tmp_path)]) == 1
    assert cli_main(["run", "--input", "/missing.xyz",
                     "--out", str(tmp_path)]) == 2
    assert cli_main(["run", "--scene-id", "no-such-scene",
                     "--out", str(tmp_path)]) == 1


def test_cli_bench_filtered(tmp_path):
    assert cli_main(["bench", "--rounds", "1", "--filter", "a1.3-v0.014-cone",
                     "--out", str(tmp_path)]) == 0
    csv = (tmp_path / "bench.csv").read_text()
    lines = csv.strip().splitlines()
    assert len(lines) == 2 and lines[1].endswith("OK")
    assert cli_main(["bench", "--filter", "no-such", "--out", str(tmp_path)]) == 1
