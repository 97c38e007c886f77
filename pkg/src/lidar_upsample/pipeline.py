"""End-to-end runs: configuration, per-frame processing, sweeps, reports.

A run is driven by a declarative config (YAML or JSON) listing frames and
parameters; command-line flags override individual fields. Frames come in
two flavors: raw sensor scans (projected through a calibration) or
pre-binned sparse depth PNGs (e.g. from the synthetic generator). Every
output (depth PNGs, error maps, CSV reports, manifest) is deterministic
for a fixed config.
"""

from __future__ import annotations

import dataclasses
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from . import delaunay, depthmap, evaluation, kitti_io, projection
from .methods import ALL_METHODS, DELAUNAY_METHODS, WINDOW_METHODS, make_interpolator

REPORT_COLUMNS = ("frame_id", "d1_fg", "d1_bg", "d1_all", "density")

_DEL_MODES = {"del_lin": "linear", "del_nea": "nearest", "del_nat": "natural"}

# the compiled engine is internally row-parallel; one kernel at a time
_ENGINE_LOCK = threading.Lock()


class PipelineError(RuntimeError):
    """Raised when a run cannot produce any output."""


@dataclass
class FrameSpec:
    frame_id: str
    scan: Path | None = None
    sparse: Path | None = None
    gt_disparity: Path | None = None
    fg_mask: Path | None = None

    def paths(self):
        return [p for p in (self.scan, self.sparse, self.gt_disparity,
                            self.fg_mask) if p is not None]


@dataclass
class RunConfig:
    frames: list[FrameSpec] = field(default_factory=list)
    out: Path = Path("out")
    calib: Path | None = None
    method: str = "bfstar"
    mr: int = 13
    idw_p: float = 2.0
    nugget: float = 0.0
    sill: float | None = None
    range_len: float | None = None
    epsilon: float = 0.08
    min_pts: int = 2
    thr: float = 1.0
    baseline: float | None = None
    focal: float | None = None
    camera: int = 2
    image_size: tuple[int, int] | None = None  # (mu, mv) for scan frames
    horizon_row: int | None = None
    keep_case1: bool = False
    range_mode: str = "camera"
    error_maps: bool = False
    seed: int = 0
    workers: int = 1


def load_config(path) -> RunConfig:
    """Read a YAML/JSON config; relative paths resolve against the file."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, dict):
        raise PipelineError(f"{path}: config must be a mapping")
    base = path.parent

    def respath(v):
        p = Path(v)
        return p if p.is_absolute() else base / p

    frames = []
    for i, fr in enumerate(raw.pop("frames", [])):
        frames.append(FrameSpec(
            frame_id=str(fr.get("frame_id", f"{i:06d}")),
            scan=respath(fr["scan"]) if fr.get("scan") else None,
            sparse=respath(fr["sparse"]) if fr.get("sparse") else None,
            gt_disparity=respath(fr["gt_disparity"]) if fr.get("gt_disparity") else None,
            fg_mask=respath(fr["fg_mask"]) if fr.get("fg_mask") else None,
        ))
    cfg = RunConfig(frames=frames)
    for key, val in raw.items():
        if not hasattr(cfg, key):
            raise PipelineError(f"{path}: unknown config key {key!r}")
        if key in ("out", "calib") and val is not None:
            val = respath(val)
        if key == "image_size" and val is not None:
            val = (int(val[0]), int(val[1]))
        setattr(cfg, key, val)
    return cfg


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Replace config fields with non-None override values."""
    vals = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **vals)


def validate_config(cfg: RunConfig, *, need_frames=True):
    """Fail fast (before any I/O) on an unusable configuration."""
    if cfg.method not in ALL_METHODS:
        raise PipelineError(
            f"unknown method {cfg.method!r}; expected one of {ALL_METHODS}")
    if cfg.mr < 1 or cfg.mr % 2 == 0:
        raise PipelineError(f"mr must be an odd positive integer, got {cfg.mr}")
    if cfg.range_mode not in projection.RANGE_MODES:
        raise PipelineError(f"range_mode must be one of {projection.RANGE_MODES}")
    if need_frames and not cfg.frames:
        raise PipelineError("no frames configured")
    for fr in cfg.frames:
        if (fr.scan is None) == (fr.sparse is None):
            raise PipelineError(
                f"frame {fr.frame_id}: exactly one of scan/sparse is required")
        if fr.scan is not None and cfg.calib is None:
            raise PipelineError(
                f"frame {fr.frame_id}: scan frames need a calibration file")
        missing = [str(p) for p in fr.paths() if not Path(p).exists()]
        if missing:
            raise PipelineError(
                f"frame {fr.frame_id}: missing input file(s): {', '.join(missing)}")
    if cfg.calib is not None and not Path(cfg.calib).exists():
        raise PipelineError(f"calibration file not found: {cfg.calib}")


@dataclass
class FrameData:
    """One loaded frame, ready for estimation."""

    frame_id: str
    smap: depthmap.SparseDepthMap
    gt: kitti_io.DisparityMap | None
    fg_mask: np.ndarray | None
    baseline: float | None
    focal: float | None


def load_frame(cfg: RunConfig, frame: FrameSpec, calib=None) -> FrameData:
    """Load, project/bin, and horizon-tag one frame."""
    if frame.sparse is not None:
        dm = kitti_io.load_depth_image(frame.sparse)
        vv, uu = np.nonzero(dm.depth > 0)
        smap = depthmap.SparseDepthMap.from_samples(
            dm.mu, dm.mv, uu, vv, dm.depth[vv, uu])
        baseline, focal = cfg.baseline, cfg.focal
    else:
        if calib is None:
            calib = kitti_io.load_calibration(cfg.calib, camera=cfg.camera)
        pc = kitti_io.load_point_cloud(frame.scan)
        gt_probe = None
        if cfg.image_size is not None:
            mu, mv = cfg.image_size
        elif frame.gt_disparity is not None:
            gt_probe = kitti_io.load_groundtruth_disparity(frame.gt_disparity)
            mu, mv = gt_probe.width, gt_probe.height
        else:
            raise PipelineError(
                f"frame {frame.frame_id}: image_size is required when no "
                "ground truth provides the dimensions")
        smap = projection.project(pc, calib, mu, mv, range_mode=cfg.range_mode)
        baseline = cfg.baseline if cfg.baseline is not None else calib.baseline
        focal = cfg.focal if cfg.focal is not None else calib.focal

    gt = None
    if frame.gt_disparity is not None:
        gt = kitti_io.load_groundtruth_disparity(frame.gt_disparity)
    fg = None
    if frame.fg_mask is not None:
        fg = np.array(Image.open(frame.fg_mask)) > 0
    smap.horizon_row = (cfg.horizon_row if cfg.horizon_row is not None
                        else projection.compute_horizon_line(smap))
    return FrameData(frame_id=frame.frame_id, smap=smap, gt=gt, fg_mask=fg,
                     baseline=baseline, focal=focal)


def estimate_frame(cfg: RunConfig, data: FrameData, method=None, mr=None):
    """Run the configured estimator over one loaded frame."""
    method = method if method is not None else cfg.method
    mr = mr if mr is not None else cfg.mr
    if method in WINDOW_METHODS:
        interp = make_interpolator(
            method, idw_p=cfg.idw_p, nugget=cfg.nugget, sill=cfg.sill,
            range_len=cfg.range_len, epsilon=cfg.epsilon,
            min_pts=cfg.min_pts, thr=cfg.thr)
        with _ENGINE_LOCK:
            return depthmap.upsample(data.smap, interp, mr,
                                     keep_case1=cfg.keep_case1)
    tri = delaunay.triangulate(data.smap.uv, data.smap.r)
    return delaunay.interpolate_delaunay(
        tri, _DEL_MODES[method], data.smap.mu, data.smap.mv,
        data.smap.horizon_row)


def evaluate_frame(data: FrameData, est) -> evaluation.EvalReport | None:
    if data.gt is None:
        return None
    if data.baseline is None or data.focal is None:
        raise PipelineError(
            f"frame {data.frame_id}: baseline and focal are required to "
            "evaluate against ground truth")
    return evaluation.d1_metrics(est, data.gt, data.fg_mask,
                                 baseline=data.baseline, focal=data.focal)


def _fmt_pct(x):
    return "" if x is None else f"{x:.4f}"


def write_report_csv(path, rows):
    """rows: iterable of (frame_id, EvalReport)."""
    lines = [",".join(REPORT_COLUMNS)]
    for frame_id, rep in rows:
        lines.append(",".join([
            str(frame_id), _fmt_pct(rep.d1_fg), _fmt_pct(rep.d1_bg),
            _fmt_pct(rep.d1_all), _fmt_pct(rep.density)]))
    Path(path).write_text("\n".join(lines) + "\n")


def format_report_table(rows):
    """Plain-text table of (label, EvalReport) rows for stdout."""
    out = [f"{'frame':>12} {'D1-fg':>8} {'D1-bg':>8} {'D1-all':>8} {'density':>8}"]
    for label, rep in rows:
        out.append(f"{label:>12} {_fmt_pct(rep.d1_fg):>8} {_fmt_pct(rep.d1_bg):>8} "
                   f"{_fmt_pct(rep.d1_all):>8} {_fmt_pct(rep.density):>8}")
    return "\n".join(out)


def _write_manifest(cfg: RunConfig, out_dir: Path, extra=None):
    def jsonify(v):
        if isinstance(v, Path):
            return str(v)
        if isinstance(v, tuple):
            return list(v)
        if dataclasses.is_dataclass(v) and not isinstance(v, type):
            return {k: jsonify(val) for k, val in dataclasses.asdict(v).items()}
        if isinstance(v, list):
            return [jsonify(x) for x in v]
        if isinstance(v, dict):
            return {k: jsonify(val) for k, val in v.items()}
        return v

    try:
        version = metadata.version("lidar-upsample")
    except metadata.PackageNotFoundError:
        version = "unknown"
    manifest = {
        "config": {k: jsonify(v) for k, v in dataclasses.asdict(cfg).items()},
        "seed": cfg.seed,
        "versions": {
            "lidar-upsample": version,
            "numpy": np.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _depth_name(frame_id, method, mr):
    if method in DELAUNAY_METHODS:
        return f"{frame_id}_{method}.png"
    return f"{frame_id}_{method}_mr{mr}.png"


def _process_one(cfg, frame, calib, depth_dir, error_dir):
    data = load_frame(cfg, frame, calib)
    est = estimate_frame(cfg, data)
    kitti_io.write_depth_image(
        est, depth_dir / _depth_name(frame.frame_id, cfg.method, cfg.mr))
    rep = evaluate_frame(data, est)
    if rep is not None and cfg.error_maps:
        evaluation.render_error_map(
            est, data.gt, baseline=data.baseline, focal=data.focal,
            path=error_dir / _depth_name(frame.frame_id, cfg.method, cfg.mr))
    return rep


def run_pipeline(cfg: RunConfig):
    """Process every configured frame; returns the aggregate report (or
    None when no frame has ground truth). Per-frame failures are reported
    and skipped; the run fails only if nothing succeeds."""
    validate_config(cfg)
    out_dir = Path(cfg.out)
    depth_dir = out_dir / "depth"
    depth_dir.mkdir(parents=True, exist_ok=True)
    error_dir = out_dir / "error"
    if cfg.error_maps:
        error_dir.mkdir(parents=True, exist_ok=True)

    calib = (kitti_io.load_calibration(cfg.calib, camera=cfg.camera)
             if cfg.calib is not None else None)
    n = len(cfg.frames)
    results: list = [None] * n
    succeeded = [False] * n
    failures = []

    def work(i):
        results[i] = _process_one(cfg, cfg.frames[i], calib, depth_dir, error_dir)
        succeeded[i] = True

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futs = {pool.submit(work, i): i for i in range(n)}
            for fut, i in futs.items():
                try:
                    fut.result()
                except Exception as exc:  # noqa: BLE001 - per-frame isolation
                    failures.append((cfg.frames[i].frame_id, exc))
    else:
        for i in range(n):
            try:
                work(i)
            except Exception as exc:  # noqa: BLE001 - per-frame isolation
                failures.append((cfg.frames[i].frame_id, exc))

    if not any(succeeded):
        raise PipelineError(
            "all frames failed: "
            + "; ".join(f"{fid}: {exc}" for fid, exc in failures))
    for fid, exc in failures:
        print(f"warning: frame {fid} failed: {exc}")

    reports = [(cfg.frames[i].frame_id, results[i])
               for i in range(len(cfg.frames)) if results[i] is not None]
    aggregate = None
    if reports:
        aggregate = evaluation.EvalReport.aggregate([r for _, r in reports])
        write_report_csv(out_dir / "report.csv", reports + [("ALL", aggregate)])
    _write_manifest(cfg, out_dir)
    return aggregate


def run_sweep(cfg: RunConfig, mr_values, methods=None):
    """Evaluate (method, mr) combinations over the configured frames.

    Emits ``sweep.csv`` (one row per method and mask size) and
    ``density.csv`` (window occupancy statistics per mask size). Frames
    are loaded once and reused. Returns the row dictionaries.
    """
    validate_config(cfg)
    methods = list(methods) if methods else [cfg.method]
    for m in methods:
        if m not in ALL_METHODS:
            raise PipelineError(f"unknown method {m!r}")
    for mr in mr_values:
        if mr < 1 or mr % 2 == 0:
            raise PipelineError(f"sweep mr values must be odd, got {mr}")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    calib = (kitti_io.load_calibration(cfg.calib, camera=cfg.camera)
             if cfg.calib is not None else None)
    frames = [load_frame(cfg, fr, calib) for fr in cfg.frames]

    density_lines = ["mr,n_max,n_ave,d_ens"]
    for mr in mr_values:
        stats = [depthmap.density_stats(d.smap, mr) for d in frames]
        weights = [(d.smap.mv - d.smap.horizon_row) * d.smap.mu for d in frames]
        tot = sum(weights)
        n_ave = sum(s.n_ave * w for s, w in zip(stats, weights)) / tot
        d_ens = sum(s.d_ens * w for s, w in zip(stats, weights)) / tot
        density_lines.append(
            f"{mr},{max(s.n_max for s in stats)},{n_ave:.4f},{d_ens:.4f}")
    (out_dir / "density.csv").write_text("\n".join(density_lines) + "\n")

    rows = []
    sweep_lines = ["method,mr,d1_fg,d1_bg,d1_all,density"]
    del_cache: dict = {}
    for method in methods:
        for mr in mr_values:
            reps = []
            for data in frames:
                key = (method, data.frame_id)
                if method in DELAUNAY_METHODS and key in del_cache:
                    est = del_cache[key]
                else:
                    est = estimate_frame(cfg, data, method=method, mr=mr)
                    if method in DELAUNAY_METHODS:
                        del_cache[key] = est
                rep = evaluate_frame(data, est)
                if rep is not None:
                    reps.append(rep)
            agg = evaluation.EvalReport.aggregate(reps) if reps else None
            row = {"method": method, "mr": mr, "report": agg}
            rows.append(row)
            if agg is not None:
                sweep_lines.append(
                    f"{method},{mr},{_fmt_pct(agg.d1_fg)},{_fmt_pct(agg.d1_bg)},"
                    f"{_fmt_pct(agg.d1_all)},{_fmt_pct(agg.density)}")
            else:
                sweep_lines.append(f"{method},{mr},,,,")
    (out_dir / "sweep.csv").write_text("\n".join(sweep_lines) + "\n")
    _write_manifest(cfg, out_dir, extra={"sweep": {
        "mr_values": list(mr_values), "methods": methods}})
    return rows
