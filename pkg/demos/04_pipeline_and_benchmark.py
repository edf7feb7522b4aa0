"""End-to-end pipeline runs: a single scene, a catalogue slice, and the
ablation that shows what each stage contributes.

The full 18-scene benchmark with many rounds is the CLI's job
(``pilevol bench --rounds 50``); this script keeps to a quick cross
section so it finishes in about a minute.
"""

from dataclasses import replace

from pilevol.pipeline import PipelineConfig, bench_csv, bench_reference, run_pipeline
from pilevol.synth import generate_scene, reference_scenes

# one scene, full detail
spec = reference_scenes()[0]
scene = generate_scene(spec)
report = run_pipeline(PipelineConfig(seed=spec.seed), scene=scene)
print(f"{spec.scene_id}: true {scene.true_volume:.4f} m^3")
for stage, count in report.stage_counts.items():
    print(f"  {stage:12s} {count:7d} points   {report.timings_s[stage]:6.2f} s")
print(f"  ground at {report.ground.height * 1000:+.1f} mm, "
      f"volume {report.volume:.5f} m^3 "
      f"({report.relative_error * 100:+.2f}%)\n")

# a slice of the reference catalogue (one scene per footprint)
specs = [s for s in reference_scenes() if s.scene_id.endswith("cone")]
rows = bench_reference(specs, rounds=1, verbose=True)
print()
print(bench_csv(rows))

# ablation: what posture correction buys on a tilted capture
tilted = replace(spec, tilt_deg=10.0)
on = run_pipeline(PipelineConfig(seed=7), scene=generate_scene(tilted))
off = run_pipeline(PipelineConfig(seed=7, enable_posture=False),
                   scene=generate_scene(tilted))
print(f"10-degree tilt, posture correction on : {on.relative_error * 100:+8.2f}%")
print(f"10-degree tilt, posture correction off: {off.relative_error * 100:+8.2f}%")
for warning in off.warnings:
    print(f"  warning: {warning}")
