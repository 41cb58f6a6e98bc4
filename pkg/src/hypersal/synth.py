"""Synthetic hyperspectral scene generation.

Scenes reproduce the three benchmark stress factors: wide object-size ranges,
foreground/background role reversal between scenes, and multiple salient
objects. Geometry is star-convex blobs (elliptical or polygonal radial
profiles) filled with a foreground spectral signature over a background
signature, plus white Gaussian noise; labels carry a 1-pixel ignore ring
around every blob to model boundary spectral mixing.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .cube import GroundTruth, HsiCube, save_cube

WAVELENGTH_RANGE_NM = (466.0, 940.0)
MIN_SIGNATURE_ANGLE = 0.15  # radians, floor on fg/bg spectral separation


class PlacementError(RuntimeError):
    """Objects could not be placed without total overlap."""


@dataclass
class SceneSpec:
    height: int = 64
    width: int = 64
    bands: int = 8
    object_count: int = 3
    size_range: tuple = (0.08, 0.35)    # blob radius as a fraction of min side
    fg_signature: np.ndarray = None     # (bands,) reflectance
    bg_signature: np.ndarray = None
    noise_std: float = 0.02
    reversal_flag: bool = False         # swap which signature fills the blobs
    distractor_count: int = 0           # extra blobs labelled background
    distractor_signature: np.ndarray = None

    def __post_init__(self):
        if self.object_count < 1:
            raise ValueError(f"object_count must be >= 1, got {self.object_count}")
        lo, hi = self.size_range
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"size_range must lie in (0,1), got {self.size_range}")
        for name in ("fg_signature", "bg_signature", "distractor_signature"):
            sig = getattr(self, name)
            if sig is not None:
                sig = np.asarray(sig, dtype=np.float64)
                if sig.shape != (self.bands,):
                    raise ValueError(f"{name} must have length {self.bands}, got {sig.shape}")
                setattr(self, name, sig)


def band_wavelengths(bands):
    return np.linspace(*WAVELENGTH_RANGE_NM, bands)


def smooth_signature(rng, bands, lo=0.1, hi=0.9):
    """Random smooth reflectance curve: a few random cosine harmonics, rescaled."""
    grid = np.linspace(0.0, 1.0, bands)
    curve = np.zeros(bands)
    for k in range(1, 4):
        curve += rng.uniform(-1.0, 1.0) * np.cos(np.pi * k * grid + rng.uniform(0, np.pi))
    curve -= curve.min()
    span = curve.max()
    if span < 1e-9:
        curve[:] = 0.5
    else:
        curve /= span
    return lo + (hi - lo) * curve


def signature_angle(a, b):
    cosv = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(cosv, -1.0, 1.0)))


def signature_pair(rng, bands, min_angle=MIN_SIGNATURE_ANGLE, max_tries=200):
    """Two smooth signatures with spectral angle at least min_angle apart."""
    for _ in range(max_tries):
        a = smooth_signature(rng, bands)
        b = smooth_signature(rng, bands)
        if signature_angle(a, b) >= min_angle:
            return a, b
    raise RuntimeError(f"could not draw signatures {min_angle} rad apart")


def _blob_mask(h, w, cy, cx, radius, rng):
    """Star-convex blob: elliptical or polygonal radial profile around (cy,cx)."""
    yy, xx = np.mgrid[0:h, 0:w]
    dy = yy - cy
    dx = xx - cx
    theta = np.arctan2(dy, dx)
    rr = np.hypot(dy, dx)
    if rng.random() < 0.5:
        # rotated ellipse
        phi = rng.uniform(0, np.pi)
        a = radius
        b = radius * rng.uniform(0.4, 1.0)
        t = theta - phi
        limit = (a * b) / np.sqrt((b * np.cos(t)) ** 2 + (a * np.sin(t)) ** 2)
    else:
        # polygon-like: piecewise-linear radial profile over random vertices
        k = int(rng.integers(3, 8))
        vertex_r = radius * rng.uniform(0.55, 1.0, size=k)
        frac = (theta + np.pi) / (2.0 * np.pi) * k
        i0 = np.floor(frac).astype(int) % k
        i1 = (i0 + 1) % k
        t = frac - np.floor(frac)
        limit = vertex_r[i0] * (1.0 - t) + vertex_r[i1] * t
    return rr <= limit


def _ignore_ring(fg):
    """Pixels 4-adjacent to the foreground but outside it."""
    ring = np.zeros_like(fg)
    ring[:-1] |= fg[1:]
    ring[1:] |= fg[:-1]
    ring[:, :-1] |= fg[:, 1:]
    ring[:, 1:] |= fg[:, :-1]
    return ring & ~fg


def synth_scene(spec, rng):
    """Generate one (cube, labels) pair from a SceneSpec.

    The rng drives, in fixed order: signature draws (when the spec leaves them
    unset), blob placement, and the noise field, making scenes reproducible
    per seed. The reversal flag swaps which signature fills the blobs without
    touching the geometry draws.
    """
    h, w = spec.height, spec.width
    fg_sig, bg_sig = spec.fg_signature, spec.bg_signature
    if fg_sig is None or bg_sig is None:
        fg_sig, bg_sig = signature_pair(rng, spec.bands)
    if spec.reversal_flag:
        fg_sig, bg_sig = bg_sig, fg_sig

    side = min(h, w)

    def place_blobs(count, occupied):
        placed_mask = np.zeros((h, w), dtype=bool)
        for _ in range(count):
            placed = False
            for _attempt in range(100):
                radius = rng.uniform(*spec.size_range) * side / 2.0
                cy = rng.uniform(radius * 0.5, h - radius * 0.5)
                cx = rng.uniform(radius * 0.5, w - radius * 0.5)
                blob = _blob_mask(h, w, cy, cx, radius, rng)
                blob &= ~occupied
                if not blob.any():
                    continue
                fresh = blob & ~placed_mask
                if fresh.sum() >= 0.5 * blob.sum():
                    placed_mask |= blob
                    placed = True
                    break
            if not placed:
                raise PlacementError(
                    f"could not place object without excessive overlap after 100 "
                    f"attempts ({count} objects, size_range {spec.size_range})")
        return placed_mask

    fg = place_blobs(spec.object_count, np.zeros((h, w), dtype=bool))
    labels = np.zeros((h, w), dtype=np.int8)
    labels[fg] = 1
    ring = _ignore_ring(fg)
    labels[ring] = -1

    values = np.empty((h, w, spec.bands), dtype=np.float64)
    values[:] = bg_sig
    values[fg] = fg_sig
    if spec.distractor_count > 0:
        if spec.distractor_signature is None:
            raise ValueError("distractor_count > 0 needs a distractor_signature")
        distract = place_blobs(spec.distractor_count, fg | ring)
        values[distract] = spec.distractor_signature
    if spec.noise_std > 0:
        values = values + rng.normal(0.0, spec.noise_std, size=values.shape)
    values = np.clip(values, 0.0, 6.5535).astype(np.float32)

    cube = HsiCube(values=values, wavelengths=band_wavelengths(spec.bands), scaled=True)
    return cube, GroundTruth(labels=labels)


# ---------------------------------------------------------------------------
# dataset emission
# ---------------------------------------------------------------------------

def random_spec(rng, side=64, bands=8, noise_std=0.02):
    """Draw a varied two-material SceneSpec: object count, sizes and role
    reversal vary; fg/bg signatures are drawn inside synth_scene."""
    return SceneSpec(
        height=side,
        width=side,
        bands=bands,
        object_count=int(rng.integers(1, 7)),
        size_range=(float(rng.uniform(0.05, 0.1)), float(rng.uniform(0.2, 0.5))),
        noise_std=noise_std,
        reversal_flag=bool(rng.random() < 0.5),
    )


def band_directions(bands):
    """Two orthonormal zero-mean band patterns: the dataset-wide salient
    contrast direction and the distractor direction. Zero mean keeps broadband
    intensity unchanged, so the classes differ in spectral shape only."""
    grid = np.linspace(0.0, 1.0, bands)
    u_s = np.cos(2.0 * np.pi * grid)
    u_s -= u_s.mean()
    u_s /= np.linalg.norm(u_s)
    u_d = np.sin(2.0 * np.pi * grid)
    u_d -= u_d.mean()
    u_d -= (u_d @ u_s) * u_s
    u_d /= np.linalg.norm(u_d)
    return u_s, u_d


def contrast_spec(rng, side=64, bands=8, noise_std=0.03):
    """Benchmark scene: salient blobs shift the background spectrum along the
    dataset's salient band direction; distractor blobs (labelled background)
    shift it along the orthogonal direction by a comparable amount. Contrast
    magnitude alone therefore cannot separate the classes; the spectral shape
    of the contrast can."""
    u_s, u_d = band_directions(bands)
    bg = smooth_signature(rng, bands, lo=0.3, hi=0.7)
    amp_s = rng.uniform(0.22, 0.4) * (1.0 if rng.random() < 0.5 else -1.0)
    amp_d = rng.uniform(0.22, 0.4) * (1.0 if rng.random() < 0.5 else -1.0)
    return SceneSpec(
        height=side,
        width=side,
        bands=bands,
        object_count=int(rng.integers(1, 6)),
        size_range=(float(rng.uniform(0.06, 0.1)), float(rng.uniform(0.2, 0.45))),
        fg_signature=np.clip(bg + amp_s * u_s, 0.02, 1.2),
        bg_signature=bg,
        noise_std=noise_std,
        distractor_count=int(rng.integers(1, 6)),
        distractor_signature=np.clip(bg + amp_d * u_d, 0.02, 1.2),
    )


RECIPES = {"contrast": contrast_spec, "plain": random_spec}


def generate_dataset(out_dir, count, base_seed=0, side=64, bands=8,
                     noise_std=0.03, recipe="contrast"):
    """Emit ``count`` scene pairs plus a manifest listing seeds and specs."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; options: {sorted(RECIPES)}")
    spec_fn = RECIPES[recipe]
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(count):
        seed = base_seed + i
        rng = np.random.default_rng(seed)
        spec = spec_fn(rng, side=side, bands=bands, noise_std=noise_std)
        cube, gt = synth_scene(spec, rng)
        stem = f"scene_{i:04d}"
        save_cube(os.path.join(out_dir, stem + ".hdr"),
                  os.path.join(out_dir, stem + ".dat"), cube, gt)
        entries.append({
            "header": stem + ".hdr",
            "data": stem + ".dat",
            "seed": seed,
            "recipe": recipe,
            "spec": {
                "height": spec.height, "width": spec.width, "bands": spec.bands,
                "object_count": spec.object_count,
                "size_range": list(spec.size_range),
                "noise_std": spec.noise_std,
                "reversal_flag": spec.reversal_flag,
                "distractor_count": spec.distractor_count,
            },
        })
    manifest = {"format": "hypersal-synth-1", "count": count, "recipe": recipe,
                "scenes": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
