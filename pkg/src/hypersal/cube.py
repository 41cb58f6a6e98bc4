"""Hyperspectral cube I/O, radiometric scaling, resampling, masking, augmentation.

File format (bit-exact round trip):
  * header: plain text, one ``key value`` pair per line after a magic line
    ``HYPERSAL-CUBE 1``. Keys: height, width, bands, dtype (uint16|float32),
    scaled (0|1), has_labels (0|1), wavelengths (nm, space separated).
  * data: raw little-endian payload, band-sequential (band-major, rows within
    band in row-major order). When has_labels is 1 an int8 label plane
    (height*width bytes, values -1/0/1) follows the cube payload.
"""

import io
import os
from dataclasses import dataclass

import numpy as np

from . import kernels

MAGIC = "HYPERSAL-CUBE"
VERSION = 1
RADIOMETRIC_SCALE = 10000.0

_DTYPES = {"uint16": np.dtype("<u2"), "float32": np.dtype("<f4")}


class CubeFormatError(ValueError):
    """Malformed header or payload."""


@dataclass
class HsiCube:
    values: np.ndarray          # (H, W, C), uint16 raw counts or float32 reflectance
    wavelengths: np.ndarray     # (C,) nm, strictly increasing
    scaled: bool = False        # True once radiometric scaling has been applied

    def __post_init__(self):
        if self.values.ndim != 3:
            raise CubeFormatError(f"cube must be HxWxC, got shape {self.values.shape}")
        self.wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        if len(self.wavelengths) != self.values.shape[2]:
            raise CubeFormatError(
                f"{len(self.wavelengths)} wavelengths for {self.values.shape[2]} bands")
        if len(self.wavelengths) > 1 and not np.all(np.diff(self.wavelengths) > 0):
            raise CubeFormatError("wavelengths must be strictly increasing")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def bands(self):
        return self.values.shape[2]


@dataclass
class GroundTruth:
    labels: np.ndarray          # (H, W) int8 in {-1, 0, 1}

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)
        bad = ~np.isin(self.labels, (-1, 0, 1))
        if bad.any():
            raise CubeFormatError(
                f"labels must be in {{-1,0,1}}; found {np.unique(self.labels[bad])}")

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]


def save_cube(header_path, data_path, cube, gt=None):
    dtype_name = "uint16" if cube.values.dtype == np.uint16 else "float32"
    lines = [
        f"{MAGIC} {VERSION}",
        f"height {cube.height}",
        f"width {cube.width}",
        f"bands {cube.bands}",
        f"dtype {dtype_name}",
        f"scaled {int(cube.scaled)}",
        f"has_labels {int(gt is not None)}",
        "wavelengths " + " ".join(repr(float(w)) for w in cube.wavelengths),
    ]
    with open(header_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    payload = io.BytesIO()
    # band-sequential: one full HxW plane per band
    planes = np.ascontiguousarray(np.moveaxis(cube.values, 2, 0)).astype(_DTYPES[dtype_name])
    payload.write(planes.tobytes())
    if gt is not None:
        if gt.labels.shape != (cube.height, cube.width):
            raise CubeFormatError(
                f"label plane {gt.labels.shape} does not match cube {cube.height}x{cube.width}")
        payload.write(gt.labels.astype(np.int8).tobytes())
    with open(data_path, "wb") as fh:
        fh.write(payload.getvalue())


def load_cube(header_path, data_path):
    """Read a (cube, labels-or-None) pair, validating sizes byte-exactly."""
    with open(header_path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith(MAGIC):
        raise CubeFormatError(f"{header_path}: missing {MAGIC} magic")
    version = int(lines[0].split()[1])
    if version != VERSION:
        raise CubeFormatError(f"{header_path}: unsupported version {version}")
    fields = {}
    for ln in lines[1:]:
        key, _, value = ln.partition(" ")
        fields[key] = value
    try:
        h = int(fields["height"])
        w = int(fields["width"])
        c = int(fields["bands"])
        dtype_name = fields["dtype"]
        scaled = bool(int(fields["scaled"]))
        has_labels = bool(int(fields["has_labels"]))
        wavelengths = np.array([float(v) for v in fields["wavelengths"].split()])
    except KeyError as missing:
        raise CubeFormatError(f"{header_path}: missing header field {missing}") from None
    if dtype_name not in _DTYPES:
        raise CubeFormatError(f"{header_path}: unknown dtype {dtype_name!r}")
    dtype = _DTYPES[dtype_name]
    expected = h * w * c * dtype.itemsize + (h * w if has_labels else 0)
    actual = os.path.getsize(data_path)
    if actual != expected:
        raise CubeFormatError(
            f"{data_path}: payload is {actual} bytes, header implies {expected} "
            f"({h}x{w}x{c} {dtype_name}{' + labels' if has_labels else ''})")
    with open(data_path, "rb") as fh:
        raw = fh.read()
    cube_bytes = h * w * c * dtype.itemsize
    planes = np.frombuffer(raw[:cube_bytes], dtype=dtype).reshape(c, h, w)
    values = np.moveaxis(planes, 0, 2).copy()
    cube = HsiCube(values=values, wavelengths=wavelengths, scaled=scaled)
    gt = None
    if has_labels:
        labels = np.frombuffer(raw[cube_bytes:], dtype=np.int8).reshape(h, w)
        gt = GroundTruth(labels=labels.copy())
    return cube, gt


def scale_radiometric(cube):
    """Divide raw counts by 10000; no other normalization. Rejects double scaling."""
    if cube.scaled:
        raise CubeFormatError("cube is already radiometrically scaled")
    values = (cube.values.astype(np.float32)) / np.float32(RADIOMETRIC_SCALE)
    return HsiCube(values=values, wavelengths=cube.wavelengths, scaled=True)


def nearest_indices(in_size, out_size):
    """Nearest-neighbour source index per output position (half-pixel centers)."""
    src = (np.arange(out_size) + 0.5) * (in_size / out_size)
    return np.minimum(src.astype(np.int64), in_size - 1)


def resize_cube(cube, gt, side):
    """Bilinear per band for the cube; nearest-neighbour for labels so the
    ignore value -1 is preserved, never interpolated."""
    if side < 8:
        raise ValueError(f"target side must be >= 8, got {side}")
    if cube.height == side and cube.width == side:
        return cube, gt
    values = kernels.bilinear_forward(np.ascontiguousarray(cube.values, dtype=np.float32),
                                      side, side)
    out_cube = HsiCube(values=values, wavelengths=cube.wavelengths, scaled=cube.scaled)
    out_gt = None
    if gt is not None:
        rows = nearest_indices(gt.height, side)
        cols = nearest_indices(gt.width, side)
        out_gt = GroundTruth(labels=gt.labels[np.ix_(rows, cols)])
    return out_cube, out_gt


def valid_mask(gt):
    """1.0 where the label is 0/1, 0.0 where it is the ignore value -1."""
    labels = gt.labels if isinstance(gt, GroundTruth) else np.asarray(gt)
    if not np.isin(labels, (-1, 0, 1)).all():
        raise ValueError("labels outside {-1,0,1}")
    return (labels >= 0).astype(np.float32)


CROP_FRACTION_RANGE = (0.875, 1.0)


def augment(cube, gt, rng, force_flip=None):
    """Random horizontal flip (p=0.5) and random crop to 87.5-100% of the side,
    resized back to the original extent. Deterministic for a seeded rng; the
    draw order is fixed (flip, fraction, row offset, col offset)."""
    values = cube.values
    labels = gt.labels
    flip = rng.random() < 0.5 if force_flip is None else force_flip
    if flip:
        values = values[:, ::-1]
        labels = labels[:, ::-1]
    h, w = labels.shape
    frac = rng.uniform(*CROP_FRACTION_RANGE)
    ch = max(1, round(h * frac))
    cw = max(1, round(w * frac))
    oy = int(rng.integers(0, h - ch + 1))
    ox = int(rng.integers(0, w - cw + 1))
    values = np.ascontiguousarray(values[oy:oy + ch, ox:ox + cw], dtype=np.float32)
    labels = np.ascontiguousarray(labels[oy:oy + ch, ox:ox + cw])
    out_cube = HsiCube(values=values, wavelengths=cube.wavelengths, scaled=cube.scaled)
    out_gt = GroundTruth(labels=labels)
    if (ch, cw) != (h, w):
        out_cube = HsiCube(values=kernels.bilinear_forward(out_cube.values, h, w),
                           wavelengths=cube.wavelengths, scaled=cube.scaled)
        rows = nearest_indices(ch, h)
        cols = nearest_indices(cw, w)
        out_gt = GroundTruth(labels=labels[np.ix_(rows, cols)])
    return out_cube, out_gt
