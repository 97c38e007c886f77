"""Readers and writers for KITTI-style sensor files.

Formats handled:

* Velodyne scan: raw little-endian binary, four float32 per point
  (x, y, z, reflectance).
* Calibration: keyed ASCII lines ("P2:", "R0_rect:", "Tr_velo_to_cam:")
  followed by whitespace-separated floats.
* Disparity / depth images: 16-bit single-channel PNG, value/256 scaling,
  0 marks pixels without a value.

All loaders are pure functions of the file contents and safe to call
concurrently on distinct paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .depthmap import DenseDepthMap

POINT_RECORD_BYTES = 16  # 4 x little-endian float32

#: PNG modes Pillow reports for 16-bit grayscale, depending on version
_PNG16_MODES = ("I;16", "I;16B", "I")


class FormatError(ValueError):
    """Raised when an input file does not match its expected format."""


@dataclass
class PointCloud:
    """Raw sensor returns in the LIDAR frame (meters, reflectance in [0,1])."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    reflectance: np.ndarray

    def __len__(self):
        return int(self.x.size)

    def xyz(self):
        """Points as an (n, 3) float64 array."""
        return np.column_stack([self.x, self.y, self.z]).astype(np.float64)


@dataclass
class Calibration:
    """Camera projection and sensor-to-camera geometry.

    ``baseline`` is optional: it is not part of the calib text scope and
    normally comes from configuration, or is derived from P2/P3 when the
    file carries both.
    """

    P: np.ndarray
    R_rect: np.ndarray
    T_velo_cam: np.ndarray
    baseline: float | None = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64).reshape(3, 4)
        self.R_rect = np.asarray(self.R_rect, dtype=np.float64).reshape(3, 3)
        self.T_velo_cam = np.asarray(self.T_velo_cam, dtype=np.float64).reshape(4, 4)
        err = np.abs(self.R_rect @ self.R_rect.T - np.eye(3)).max()
        if err > 1e-6:
            raise FormatError(f"R_rect is not orthonormal (max deviation {err:.2e})")
        if not np.array_equal(self.T_velo_cam[3], [0.0, 0.0, 0.0, 1.0]):
            raise FormatError("T_velo_cam bottom row must be (0, 0, 0, 1)")
        if self.baseline is not None and not self.baseline > 0:
            raise FormatError(f"baseline must be > 0, got {self.baseline}")
        if not self.focal > 0:
            raise FormatError(f"focal length must be > 0, got {self.focal}")

    @property
    def focal(self):
        return float(self.P[0, 0])


@dataclass
class DisparityMap:
    """Per-pixel disparity in pixels; 0.0 marks invalid pixels."""

    values: np.ndarray

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def valid_mask(self):
        return self.values > 0


def load_point_cloud(path) -> PointCloud:
    """Read a raw Velodyne scan (f32 x,y,z,reflectance records)."""
    data = Path(path).read_bytes()
    if len(data) % POINT_RECORD_BYTES != 0:
        raise FormatError(
            f"{path}: size {len(data)} is not a multiple of {POINT_RECORD_BYTES}")
    pts = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    bad = ~np.isfinite(pts).all(axis=1)
    if bad.any():
        raise FormatError(
            f"{path}: non-finite value at point index {int(np.flatnonzero(bad)[0])}")
    return PointCloud(x=pts[:, 0].copy(), y=pts[:, 1].copy(),
                      z=pts[:, 2].copy(), reflectance=pts[:, 3].copy())


def _parse_calib_lines(path):
    entries = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or ":" not in line:
            continue
        key, _, rest = line.partition(":")
        try:
            entries[key.strip()] = [float(tok) for tok in rest.split()]
        except ValueError as exc:
            raise FormatError(f"{path}: bad float in {key!r} line: {exc}") from None
    return entries


def _grab(entries, key, count, path):
    if key not in entries:
        raise FormatError(f"{path}: missing calibration key {key!r}")
    vals = entries[key]
    if len(vals) != count:
        raise FormatError(
            f"{path}: key {key!r} has {len(vals)} floats, expected {count}")
    return np.array(vals, dtype=np.float64)


def load_calibration(path, camera=2) -> Calibration:
    """Parse a keyed calibration text file.

    ``camera`` selects the projection matrix (P2 or P3). When both P2 and
    P3 are present the stereo baseline between them is derived; otherwise
    the baseline stays unset and must come from configuration.
    """
    if camera not in (2, 3):
        raise ValueError(f"camera must be 2 or 3, got {camera}")
    entries = _parse_calib_lines(path)
    P = _grab(entries, f"P{camera}", 12, path).reshape(3, 4)
    R = _grab(entries, "R0_rect", 9, path).reshape(3, 3)
    tr = _grab(entries, "Tr_velo_to_cam", 12, path).reshape(3, 4)
    T = np.vstack([tr, [0.0, 0.0, 0.0, 1.0]])
    baseline = None
    if "P2" in entries and "P3" in entries and len(entries["P2"]) == 12 \
            and len(entries["P3"]) == 12:
        p2 = np.array(entries["P2"]).reshape(3, 4)
        p3 = np.array(entries["P3"]).reshape(3, 4)
        baseline = abs(p2[0, 3] - p3[0, 3]) / p2[0, 0]
        if baseline == 0:
            baseline = None
    return Calibration(P=P, R_rect=R, T_velo_cam=T, baseline=baseline)


def write_calibration(calib: Calibration, path, camera=2):
    """Write a calibration back out in the keyed text format (P{camera},
    R0_rect, Tr_velo_to_cam); the baseline is configuration, not file state."""
    def fmt(vals):
        # 17 significant digits: float64 round-trips exactly through text
        return " ".join(f"{v:.17e}" for v in np.asarray(vals).ravel())

    text = (f"P{camera}: {fmt(calib.P)}\n"
            f"R0_rect: {fmt(calib.R_rect)}\n"
            f"Tr_velo_to_cam: {fmt(calib.T_velo_cam[:3])}\n")
    Path(path).write_text(text)


def _load_png16(path):
    img = Image.open(path)
    if img.mode not in _PNG16_MODES:
        raise FormatError(
            f"{path}: expected 16-bit single-channel PNG, got mode {img.mode!r}")
    arr = np.array(img)
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected single channel, got shape {arr.shape}")
    return arr.astype(np.int64)


def load_groundtruth_disparity(path) -> DisparityMap:
    """Read a ground-truth disparity PNG (value/256 px; 0 = invalid)."""
    raw = _load_png16(path)
    return DisparityMap(values=raw / 256.0)


def write_disparity_image(disp: DisparityMap, path):
    """Write a disparity map as 16-bit PNG (value*256 saturating; 0 = invalid)."""
    _write_png16(disp.values, path)


def load_depth_image(path) -> DenseDepthMap:
    """Read a depth PNG written by :func:`write_depth_image`."""
    raw = _load_png16(path)
    return DenseDepthMap(depth=raw / 256.0)


def write_depth_image(dmap: DenseDepthMap, path):
    """Write a depth map as 16-bit PNG at 1/256 m quantization.

    Valid depths round to the nearest step and saturate at the 16-bit
    ceiling (~256 m); pixels without an estimate store 0.
    """
    if not np.all(np.isfinite(dmap.depth[dmap.valid_mask])):
        raise ValueError("depth map holds non-finite values at valid pixels")
    _write_png16(dmap.depth, path)


def _write_png16(values, path):
    q = np.zeros(values.shape, dtype=np.uint16)
    valid = values > 0
    scaled = np.floor(values[valid] * 256.0 + 0.5)
    q[valid] = np.clip(scaled, 1, 65535).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")
