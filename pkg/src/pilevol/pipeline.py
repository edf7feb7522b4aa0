"""End-to-end measurement pipeline and batch studies.

Stage order is fixed: pass-through trim, optional voxel downsampling,
robust pre-filtering, posture correction, ground calibration, fine
filtering, then the volume estimator.  Every stage can be toggled off for
ablation runs, in which case the cloud passes through unchanged.  Reports
are plain CSV and are byte-identical for identical config and seed; stage
timings are kept out of the CSV for exactly that reason.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cloud import AxisRange, PointCloud, passthrough_filter, voxel_downsample
from .denoise import HdbscanParams, RadiusFilterParams, robust_filter
from .errors import ConfigError, EmptyCloud, PilevolError
from .ground import (
    MODE_FIRST_PEAK,
    MODE_MID_PLATEAU,
    MODE_OVERRIDE,
    GroundEstimate,
    calibrate,
    find_ground,
    fine_filter,
    height_histogram,
    override_ground,
    smooth_histogram,
)
from .pose import RansacParams, correct_posture, ransac_plane
from .synth import Scene, SceneSpec, generate_scene, reference_scenes, with_seed
from .volume import (
    AGG_MEAN,
    METHOD_COLUMN_GRID,
    METHOD_COLUMN_UNIFORM,
    METHOD_HULL3D,
    METHOD_SLICE,
    CompensationFactor,
    GridSpec,
    VolumeEstimate,
    column_volume_grid,
    column_volume_uniform,
    footprint_area,
    hull3d_volume,
    slice_volume,
)

STAGE_ORDER = ("passthrough", "downsample", "prefilter", "posture",
               "calibration", "fine_filter", "volume")


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the five-stage flow; defaults give the reference setup."""

    # stage toggles (pass-through/downsample activate via their parameters)
    enable_prefilter: bool = True
    enable_posture: bool = True
    enable_calibration: bool = True
    enable_fine_filter: bool = True

    # pre-process
    passthrough_ranges: tuple[AxisRange, ...] = ()
    downsample_voxel: float | None = None
    radius_params: RadiusFilterParams = RadiusFilterParams(r0=0.025, n_min=4)
    hdbscan_params: HdbscanParams = HdbscanParams(min_cluster_size=50, min_samples=10)

    # posture correction
    ransac: RansacParams = RansacParams()

    # ground calibration
    n_interval: int = 256
    smooth_step: int = 5
    search_band: float = 0.25
    ground_mode: str = MODE_FIRST_PEAK
    override_height: float | None = None
    margin: float = 0.012
    # measure heights from the detected ground rather than from the raised
    # margin cut: the margin then only trims the near-ground noise band and
    # does not shave the integrated column heights
    restore_margin_datum: bool = True

    # volume
    estimator: str = METHOD_COLUMN_GRID
    grid: GridSpec = GridSpec(cell_size=0.025, aggregator=AGG_MEAN)
    scene_area: float | None = None
    slice_interval: float = 0.05
    compensation: float = 1.0
    signed: bool = True

    seed: int = 0

    # downsampling thins the cloud below the default neighborhood scales, so
    # the filter radius and grid cell grow with the voxel size
    def effective_radius_params(self) -> RadiusFilterParams:
        if self.downsample_voxel is None:
            return self.radius_params
        r0 = max(self.radius_params.r0, 2.2 * self.downsample_voxel)
        return RadiusFilterParams(r0=r0, n_min=self.radius_params.n_min)

    def effective_grid(self) -> GridSpec:
        if self.downsample_voxel is None:
            return self.grid
        cell = max(self.grid.cell_size, 1.6 * self.downsample_voxel)
        return GridSpec(cell_size=cell, aggregator=self.grid.aggregator,
                        origin=self.grid.origin)

    def validate(self) -> None:
        if self.estimator not in (METHOD_COLUMN_UNIFORM, METHOD_COLUMN_GRID,
                                  METHOD_SLICE, METHOD_HULL3D):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.ground_mode not in (MODE_FIRST_PEAK, MODE_MID_PLATEAU, MODE_OVERRIDE):
            raise ConfigError(f"unknown ground mode {self.ground_mode!r}")
        if self.ground_mode == MODE_OVERRIDE and self.override_height is None:
            raise ConfigError("OVERRIDE ground mode needs override_height")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.smooth_step < 1 or self.smooth_step % 2 == 0:
            raise ConfigError("smooth_step must be a positive odd integer")
        if not 0 < self.search_band <= 1:
            raise ConfigError("search_band must be in (0, 1]")
        if self.downsample_voxel is not None and self.downsample_voxel <= 0:
            raise ConfigError("downsample_voxel must be > 0")


@dataclass
class RunReport:
    stage_counts: dict[str, int] = field(default_factory=dict)
    ground: GroundEstimate | None = None
    estimates: list[VolumeEstimate] = field(default_factory=list)
    timings_s: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    config: PipelineConfig | None = None
    true_volume: float | None = None
    relative_error: float | None = None

    @property
    def volume(self) -> float:
        return self.estimates[0].volume if self.estimates else math.nan


def _with_round_seed(config: PipelineConfig, seed: int) -> PipelineConfig:
    return replace(config, seed=seed, ransac=replace(config.ransac, seed=seed))


def run_pipeline(config: PipelineConfig, cloud: PointCloud | None = None,
                 scene: Scene | None = None) -> RunReport:
    """Execute the enabled stages in order on a cloud or synthetic scene.

    Disabled stages pass the cloud through unchanged (the ablation
    semantics).  When a scene with ground truth is given, the report also
    carries the relative volume error.
    """
    config.validate()
    if cloud is None:
        if scene is None:
            raise ConfigError("run_pipeline needs a cloud or a scene")
        cloud = scene.cloud
    report = RunReport(config=config)
    if scene is not None:
        report.true_volume = scene.true_volume
    if len(cloud) == 0:
        raise EmptyCloud("pipeline input cloud is empty")
    scene_area = config.scene_area
    if scene_area is None and scene is not None:
        scene_area = scene.spec.footprint_area

    if config.enable_calibration and not config.enable_posture:
        report.warnings.append(
            "calibration without posture correction: the height histogram "
            "is built on an unlevelled cloud and the ground peak degrades"
        )

    def record(stage: str, value: PointCloud, t0: float) -> PointCloud:
        report.stage_counts[stage] = len(value)
        report.timings_s[stage] = time.perf_counter() - t0
        return value

    t0 = time.perf_counter()
    cloud = record("passthrough",
                   passthrough_filter(cloud, config.passthrough_ranges), t0)

    t0 = time.perf_counter()
    if config.downsample_voxel is not None:
        cloud = voxel_downsample(cloud, config.downsample_voxel)
    cloud = record("downsample", cloud, t0)

    rparams = config.effective_radius_params()

    t0 = time.perf_counter()
    if config.enable_prefilter:
        cloud = robust_filter(cloud, rparams, config.hdbscan_params)
    cloud = record("prefilter", cloud, t0)
    # the pre-processed cloud is the uniform sampling of the scene the
    # element-area division refers to
    n_preprocessed = len(cloud)

    t0 = time.perf_counter()
    if config.enable_posture:
        plane = ransac_plane(cloud, config.ransac)
        cloud = correct_posture(cloud, plane)
    cloud = record("posture", cloud, t0)

    t0 = time.perf_counter()
    if config.enable_calibration:
        if config.ground_mode == MODE_OVERRIDE:
            ground = override_ground(config.override_height)
        else:
            hist = height_histogram(cloud, config.n_interval)
            hist = smooth_histogram(hist, config.smooth_step)
            ground = find_ground(hist, config.search_band, config.ground_mode)
        report.ground = ground
        cloud = calibrate(cloud, ground, config.margin)
        if config.restore_margin_datum and config.margin > 0:
            cloud = cloud.translated((0.0, 0.0, config.margin))
    cloud = record("calibration", cloud, t0)

    t0 = time.perf_counter()
    if config.enable_fine_filter:
        cloud = fine_filter(cloud, rparams, config.hdbscan_params)
    cloud = record("fine_filter", cloud, t0)

    t0 = time.perf_counter()
    comp = CompensationFactor(config.compensation)
    if config.estimator == METHOD_COLUMN_UNIFORM:
        if scene_area is None:
            raise ConfigError("COLUMN_UNIFORM needs scene_area")
        if n_preprocessed == 0:
            raise EmptyCloud("no points left before volume integration")
        element = footprint_area(scene_area, n_preprocessed)
        estimate = column_volume_uniform(cloud, element, comp, signed=config.signed)
    elif config.estimator == METHOD_COLUMN_GRID:
        estimate = column_volume_grid(cloud, config.effective_grid(), comp)
    elif config.estimator == METHOD_SLICE:
        estimate = slice_volume(cloud, config.slice_interval)
    else:
        estimate = hull3d_volume(cloud)
    report.estimates.append(estimate)
    report.stage_counts["volume"] = len(cloud)
    report.timings_s["volume"] = time.perf_counter() - t0

    if report.true_volume:
        report.relative_error = (estimate.volume - report.true_volume) / report.true_volume
    return report


# ---------------------------------------------------------------------------
# Batch studies
# ---------------------------------------------------------------------------

def _round_seed(base_seed: int, round_index: int) -> int:
    return int(np.random.SeedSequence((base_seed, round_index)).generate_state(1)[0])


@dataclass
class BenchRow:
    scene_id: str
    area: float
    true_volume: float
    rounds: int
    mean_volume: float = math.nan
    mean_rel_error: float = math.nan
    max_rel_error: float = math.nan
    error_variance: float | None = None
    status: str = "OK"
    errors: list[float] = field(default_factory=list)


def bench_reference(specs: list[SceneSpec] | None = None, rounds: int = 1,
                    config: PipelineConfig | None = None,
                    verbose: bool = False) -> list[BenchRow]:
    """Run each catalogue scene ``rounds`` times with distinct seeds.

    A failing scene is reported as a FAILED row and the run continues.
    """
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")
    if specs is None:
        specs = reference_scenes()
    if config is None:
        config = PipelineConfig()
    rows: list[BenchRow] = []
    for spec in specs:
        row = BenchRow(scene_id=spec.scene_id or "scene",
                       area=spec.footprint_area,
                       true_volume=spec.pile.true_volume,
                       rounds=rounds)
        volumes: list[float] = []
        errors: list[float] = []
        try:
            for r in range(rounds):
                seed = _round_seed(spec.seed, r)
                scene = generate_scene(with_seed(spec, seed))
                report = run_pipeline(_with_round_seed(config, seed), scene=scene)
                volumes.append(report.volume)
                errors.append(abs(report.relative_error))
            row.mean_volume = float(np.mean(volumes))
            row.mean_rel_error = float(np.mean(errors))
            row.max_rel_error = float(np.max(errors))
            row.error_variance = float(np.var(errors)) if rounds > 1 else None
            row.errors = errors
        except PilevolError as exc:
            row.status = f"FAILED: {exc}"
        rows.append(row)
        if verbose:
            print(f"  {row.scene_id}: mean error "
                  f"{row.mean_rel_error * 100:.2f}%  [{row.status}]")
    return rows


def bench_csv(rows: list[BenchRow]) -> str:
    lines = ["scene_id,area_m2,true_volume_m3,rounds,mean_volume_m3,"
             "mean_rel_error,max_rel_error,error_variance,status"]
    for r in rows:
        var = "" if r.error_variance is None else f"{r.error_variance:.6e}"
        if r.status == "OK":
            lines.append(
                f"{r.scene_id},{r.area:g},{r.true_volume:.6f},{r.rounds},"
                f"{r.mean_volume:.6f},{r.mean_rel_error:.6f},"
                f"{r.max_rel_error:.6f},{var},OK"
            )
        else:
            lines.append(f"{r.scene_id},{r.area:g},{r.true_volume:.6f},"
                         f"{r.rounds},,,,,{r.status}")
    return "\n".join(lines) + "\n"


@dataclass
class SweepRow:
    voxel_size: float
    compressed_ratio: float
    mean_error: float


def compression_sweep(spec: SceneSpec, voxel_sizes: list[float],
                      config: PipelineConfig | None = None, rounds: int = 1,
                      verbose: bool = False) -> list[SweepRow]:
    """Rerun the pipeline over a grid of downsampling voxel sizes.

    The first returned row is the uncompressed origin (voxel_size 0, ratio
    1).  The compressed ratio is the downsampled point count over the
    original count.  With the uniform-column estimator the element area
    recomputes from the downsampled count automatically, since it divides
    the scene area by the pre-processed count that reaches the integrator.
    """
    if any(s <= 0 for s in voxel_sizes):
        raise ConfigError("voxel sizes must be positive")
    if sorted(voxel_sizes) != list(voxel_sizes):
        raise ConfigError("voxel sizes must be ascending")
    if config is None:
        config = PipelineConfig()
    rows: list[SweepRow] = []
    for size in [None] + list(voxel_sizes):
        ratios: list[float] = []
        errors: list[float] = []
        for r in range(rounds):
            seed = _round_seed(spec.seed + 31, r)
            scene = generate_scene(with_seed(spec, seed))
            if size is not None:
                n_after = len(voxel_downsample(scene.cloud, size))
                ratios.append(n_after / len(scene.cloud))
            else:
                ratios.append(1.0)
            cfg = replace(_with_round_seed(config, seed), downsample_voxel=size)
            report = run_pipeline(cfg, scene=scene)
            errors.append(abs(report.relative_error))
        row = SweepRow(voxel_size=size if size is not None else 0.0,
                       compressed_ratio=float(np.mean(ratios)),
                       mean_error=float(np.mean(errors)))
        rows.append(row)
        if verbose:
            label = f"voxel {size:g} m" if size is not None else "origin"
            print(f"  {label}: ratio {row.compressed_ratio:.4f}, "
                  f"mean error {row.mean_error * 100:.2f}%")
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["voxel_size_m,compressed_ratio,mean_error"]
    for r in rows:
        lines.append(f"{r.voxel_size:g},{r.compressed_ratio:.6f},{r.mean_error:.6f}")
    return "\n".join(lines) + "\n"


def emit_histogram(config: PipelineConfig, cloud: PointCloud | None = None,
                   scene: Scene | None = None) -> tuple[str, GroundEstimate]:
    """Smoothed height histogram CSV with the detected ground bin marked.

    The cloud is taken through the pre-processing and posture stages first
    so the histogram matches what calibration actually sees.
    """
    config.validate()
    if cloud is None:
        if scene is None:
            raise ConfigError("emit_histogram needs a cloud or a scene")
        cloud = scene.cloud
    if len(cloud) == 0:
        raise EmptyCloud("cannot emit a histogram for an empty cloud")
    cloud = passthrough_filter(cloud, config.passthrough_ranges)
    if config.downsample_voxel is not None:
        cloud = voxel_downsample(cloud, config.downsample_voxel)
    if config.enable_prefilter:
        cloud = robust_filter(cloud, config.effective_radius_params(),
                              config.hdbscan_params)
    if config.enable_posture:
        plane = ransac_plane(cloud, config.ransac)
        cloud = correct_posture(cloud, plane)
    hist = smooth_histogram(height_histogram(cloud, config.n_interval),
                            config.smooth_step)
    if config.ground_mode == MODE_OVERRIDE:
        ground = override_ground(config.override_height)
        marked = int(np.argmin(np.abs(hist.bin_centers - ground.height)))
    else:
        ground = find_ground(hist, config.search_band, config.ground_mode)
        marked = ground.peak_bin
    lines = ["bin_center_m,count,is_ground"]
    for i, (center, count) in enumerate(zip(hist.bin_centers, hist.counts)):
        lines.append(f"{center:.6f},{count:.4f},{1 if i == marked else 0}")
    return "\n".join(lines) + "\n", ground


def svg_line_plot(xs, ys, path, title: str = "", marker_x: float | None = None,
                  width: int = 640, height: int = 360) -> None:
    """Tiny dependency-free polyline SVG for histogram and sweep plots."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    pad = 40
    x_span = xs.max() - xs.min() or 1.0
    y_span = ys.max() - ys.min() or 1.0
    px = pad + (xs - xs.min()) / x_span * (width - 2 * pad)
    py = height - pad - (ys - ys.min()) / y_span * (height - 2 * pad)
    points = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="1.5"/>',
    ]
    if marker_x is not None:
        mx = pad + (marker_x - xs.min()) / x_span * (width - 2 * pad)
        parts.append(f'<line x1="{mx:.1f}" y1="{pad}" x2="{mx:.1f}" '
                     f'y2="{height - pad}" stroke="crimson" stroke-dasharray="4"/>')
    if title:
        parts.append(f'<text x="{pad}" y="20" font-family="sans-serif" '
                     f'font-size="13">{title}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def run_report_csv(report: RunReport) -> str:
    """Single-run CSV: stage counts, ground, volume, error.  No timings, so
    identical config and seed reproduce the file byte for byte."""
    lines = ["field,value"]
    for stage in STAGE_ORDER:
        if stage in report.stage_counts:
            lines.append(f"count_{stage},{report.stage_counts[stage]}")
    if report.ground is not None:
        lines.append(f"ground_height_m,{report.ground.height:.6f}")
        lines.append(f"ground_mode,{report.ground.mode}")
        conf = report.ground.confidence
        lines.append(f"ground_confidence,{'inf' if math.isinf(conf) else f'{conf:.4f}'}")
    for est in report.estimates:
        lines.append(f"method,{est.method}")
        lines.append(f"volume_m3,{est.volume:.8f}")
        for key, value in sorted(est.params_used.items()):
            lines.append(f"param_{key},{value}")
    if report.true_volume is not None:
        lines.append(f"true_volume_m3,{report.true_volume:.8f}")
    if report.relative_error is not None:
        lines.append(f"relative_error,{report.relative_error:.8f}")
    for warning in report.warnings:
        lines.append(f"warning,{warning}")
    return "\n".join(lines) + "\n"
