"""Command-line interface.

Subcommands:

* ``upsample run``   - process frames (scan or sparse PNG) into depth maps
* ``upsample sweep`` - evaluate methods across mask sizes
* ``upsample synth`` - generate a synthetic scene with ground truth
* ``upsample eval``  - score an existing depth image against ground truth
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np
import yaml
from PIL import Image

from . import evaluation, kitti_io, synthetic
from .depthmap import DenseDepthMap
from .methods import ALL_METHODS
from .pipeline import (FrameSpec, PipelineError, RunConfig, apply_overrides,
                       format_report_table, load_config, run_pipeline, run_sweep)


def _build_config(config, scan, sparse, gt, fg, frame_id, **overrides):
    if config is not None:
        cfg = load_config(config)
    else:
        cfg = RunConfig()
    if scan is not None or sparse is not None:
        cfg.frames = [FrameSpec(
            frame_id=frame_id,
            scan=Path(scan) if scan else None,
            sparse=Path(sparse) if sparse else None,
            gt_disparity=Path(gt) if gt else None,
            fg_mask=Path(fg) if fg else None)]
    if overrides.get("image_size") is not None:
        w, h = overrides["image_size"].split("x")
        overrides["image_size"] = (int(w), int(h))
    if overrides.get("out") is not None:
        overrides["out"] = Path(overrides["out"])
    return apply_overrides(cfg, **overrides)


def _common_options(fn):
    opts = [
        click.option("--config", "-c", type=click.Path(exists=True),
                     help="YAML/JSON run configuration."),
        click.option("--scan", type=click.Path(), help="Single raw scan file."),
        click.option("--sparse", type=click.Path(),
                     help="Single sparse depth PNG (alternative to --scan)."),
        click.option("--gt", type=click.Path(), help="Ground-truth disparity PNG."),
        click.option("--fg", type=click.Path(), help="Foreground mask PNG."),
        click.option("--frame-id", default="000000", show_default=True),
        click.option("--calib", type=click.Path(), help="Calibration text file."),
        click.option("--method", type=click.Choice(ALL_METHODS)),
        click.option("--mr", type=int, help="Odd mask side length in pixels."),
        click.option("--idw-p", type=float, help="Inverse-distance power."),
        click.option("--epsilon", type=float, help="Cluster gap threshold."),
        click.option("--min-pts", type=int, help="Minimum cluster population."),
        click.option("--thr", type=float, help="Cluster ratio threshold."),
        click.option("--baseline", type=float, help="Stereo baseline in meters."),
        click.option("--focal", type=float, help="Focal length in pixels."),
        click.option("--camera", type=int, help="Projection camera (2 or 3)."),
        click.option("--image-size", help="Grid size WxH for scan frames."),
        click.option("--horizon-row", type=int,
                     help="Fix the horizon row instead of estimating it."),
        click.option("--range-mode",
                     type=click.Choice(["camera", "euclidean"])),
        click.option("--keep-case1/--no-keep-case1", default=None,
                     help="Pass single-sample cells through unestimated."),
        click.option("--error-maps/--no-error-maps", default=None),
        click.option("--workers", type=int, help="Parallel frame workers."),
        click.option("--seed", type=int),
        click.option("--out", type=click.Path(), help="Output directory."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Upsample sparse LIDAR depth into dense depth maps."""


@main.command()
@_common_options
def run(config, scan, sparse, gt, fg, frame_id, **overrides):
    """Run the configured method over every frame."""
    try:
        cfg = _build_config(config, scan, sparse, gt, fg, frame_id, **overrides)
        report = run_pipeline(cfg)
    except (PipelineError, kitti_io.FormatError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if report is not None:
        click.echo(format_report_table([("ALL", report)]))
    click.echo(f"outputs in {cfg.out}")


@main.command()
@click.option("--mr-values", default="3,5,7,9,11,13,15,17,19,21",
              show_default=True, help="Comma-separated odd mask sizes.")
@click.option("--methods", default=None,
              help="Comma-separated method list (default: configured method).")
@_common_options
def sweep(mr_values, methods, config, scan, sparse, gt, fg, frame_id, **overrides):
    """Evaluate methods for increasing mask sizes."""
    try:
        cfg = _build_config(config, scan, sparse, gt, fg, frame_id, **overrides)
        mrs = [int(tok) for tok in mr_values.split(",") if tok.strip()] \
            if mr_values.strip() else []
        meths = ([tok.strip() for tok in methods.split(",") if tok.strip()]
                 if methods else None)
        rows = run_sweep(cfg, mrs, meths)
    except (PipelineError, kitti_io.FormatError, ValueError) as exc:
        raise click.ClickException(str(exc))
    table = [(f"{r['method']}@mr{r['mr']}", r["report"])
             for r in rows if r["report"] is not None]
    if table:
        click.echo(format_report_table(table))
    click.echo(f"outputs in {cfg.out}")


@main.command()
@click.option("--out", type=click.Path(), required=True,
              help="Directory for the generated scene.")
@click.option("--width", type=int, default=384, show_default=True)
@click.option("--height", type=int, default=256, show_default=True)
@click.option("--rate", type=float, default=0.07, show_default=True,
              help="Fraction of valid pixels to sample.")
@click.option("--seed", type=int, default=1234, show_default=True)
@click.option("--horizon-row", type=int, default=64, show_default=True)
@click.option("--bg-depth", type=float, default=40.0, show_default=True)
@click.option("--focal", type=float, default=700.0, show_default=True)
@click.option("--baseline", type=float, default=0.54, show_default=True)
@click.option("--box", "boxes", multiple=True,
              help="Foreground box as depth:u0:u1:v0:v1 (repeatable; default "
                   "two boxes at 8 m and 14 m).")
def synth(out, width, height, rate, seed, horizon_row, bg_depth, focal,
          baseline, boxes):
    """Generate a synthetic scene: sparse samples, ground truth, mask."""
    try:
        if boxes:
            parsed = []
            for spec in boxes:
                d, u0, u1, v0, v1 = spec.split(":")
                parsed.append(synthetic.Box(depth=float(d), u0=int(u0),
                                            u1=int(u1), v0=int(v0), v1=int(v1)))
            box_list = tuple(parsed)
        else:
            box_list = synthetic.DEFAULT_BOXES
        scene = synthetic.build_scene(
            width, height, rate=rate, seed=seed, horizon_row=horizon_row,
            bg_depth=bg_depth, boxes=box_list, focal=focal, baseline=baseline)
        smap, gt, fg = synthetic.gen_synthetic(scene)
    except ValueError as exc:
        raise click.ClickException(str(exc))

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sparse_depth = np.zeros((scene.mv, scene.mu), dtype=np.float64)
    sparse_depth[smap.cell_v, smap.cell_u] = smap.r
    kitti_io.write_depth_image(DenseDepthMap(depth=sparse_depth),
                               out_dir / "sparse.png")
    kitti_io.write_disparity_image(gt, out_dir / "gt_disp.png")
    Image.fromarray((fg * np.uint8(255))).save(out_dir / "fg_mask.png")

    run_cfg = {
        "frames": [{"frame_id": "synth000", "sparse": "sparse.png",
                    "gt_disparity": "gt_disp.png", "fg_mask": "fg_mask.png"}],
        "baseline": baseline, "focal": focal, "horizon_row": horizon_row,
        "method": "bfstar", "mr": 13, "out": "out", "seed": seed,
    }
    (out_dir / "config.yaml").write_text(yaml.safe_dump(run_cfg, sort_keys=True))
    click.echo(f"scene written to {out_dir} ({smap.n_samples} samples, "
               f"horizon row {scene.horizon_row})")


@main.command("eval")
@click.option("--est", type=click.Path(exists=True), required=True,
              help="Estimated depth PNG.")
@click.option("--gt", type=click.Path(exists=True), required=True,
              help="Ground-truth disparity PNG.")
@click.option("--fg", type=click.Path(exists=True), help="Foreground mask PNG.")
@click.option("--baseline", type=float, required=True)
@click.option("--focal", type=float, required=True)
@click.option("--out", type=click.Path(), help="Optional CSV report path.")
@click.option("--error-map", type=click.Path(), help="Optional error PNG path.")
def eval_cmd(est, gt, fg, baseline, focal, out, error_map):
    """Score one depth image against disparity ground truth."""
    try:
        dmap = kitti_io.load_depth_image(est)
        disp = kitti_io.load_groundtruth_disparity(gt)
        mask = np.array(Image.open(fg)) > 0 if fg else None
        report = evaluation.d1_metrics(dmap, disp, mask,
                                       baseline=baseline, focal=focal)
        if error_map:
            evaluation.render_error_map(dmap, disp, baseline=baseline,
                                        focal=focal, path=error_map)
    except (kitti_io.FormatError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(format_report_table([(Path(est).stem[:12], report)]))
    if out:
        from .pipeline import write_report_csv
        write_report_csv(out, [(Path(est).stem, report)])


if __name__ == "__main__":
    sys.exit(main())
