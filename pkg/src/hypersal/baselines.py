"""Classical spectral-pyramid saliency.

A Gaussian pyramid is built per band; center-surround contrast maps compare a
fine "center" level against a coarser "surround" level (upsampled back to the
center extent) with either per-pixel Euclidean distance or spectral angle. The
maps are lifted to full resolution, summed, and min-max normalized.

Two ready modes:
  * sed - Euclidean distances on the raw cube (responds to radiometric scale)
  * sg  - spectral angles on the band-wise first difference of the cube
          (invariant to global positive scaling)

The whole path runs in float64 with no RNG, so outputs are bit-reproducible.
The min-max normalization carries a tiny epsilon in the denominator; besides
guarding the degenerate case this anchors the output to absolute contrast
magnitude, which is what makes the Euclidean mode scale-sensitive.
"""

import warnings

import numpy as np

from . import kernels
from .cube import HsiCube

GAUSS_TAPS = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0  # binomial 5-tap
CENTER_LEVELS = (1, 2)
SURROUND_DELTAS = (2, 3)
PYRAMID_DEPTH = max(CENTER_LEVELS) + max(SURROUND_DELTAS)
NORM_EPS = 1e-12


class DegenerateMapWarning(UserWarning):
    """The summed contrast map was constant; normalization returned zeros."""


def _blur_axis(values, axis):
    """5-tap correlation along one axis with edge replication."""
    pad = [(0, 0)] * values.ndim
    pad[axis] = (2, 2)
    padded = np.pad(values, pad, mode="edge")
    out = np.zeros_like(values)
    view = [slice(None)] * values.ndim
    n = values.shape[axis]
    for t in range(5):
        view[axis] = slice(t, t + n)
        out += GAUSS_TAPS[t] * padded[tuple(view)]
    return out


def gaussian_blur(values):
    return _blur_axis(_blur_axis(values, 0), 1)


def gaussian_pyramid(values, depth):
    """Per-band blur + decimate-by-2; level 0 is the input itself."""
    values = np.asarray(values, dtype=np.float64)
    if min(values.shape[:2]) < 2 ** depth:
        raise ValueError(
            f"extent {values.shape[:2]} too small for a depth-{depth} pyramid")
    levels = [values]
    for _ in range(depth):
        blurred = gaussian_blur(levels[-1])
        levels.append(np.ascontiguousarray(blurred[::2, ::2]))
    return levels


def spectral_angle(a, b):
    """Angle in radians between two spectra; undefined (error) for zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"spectra lengths differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("spectral angle undefined for a zero spectrum")
    cosv = np.dot(a, b) / (na * nb)
    return float(np.arccos(np.clip(cosv, -1.0, 1.0)))


def _distance_map(center, surround, mode):
    """Per-pixel distance between two same-shape cubes."""
    if mode == "euclidean":
        diff = center - surround
        return np.sqrt((diff * diff).sum(axis=2))
    if mode == "angle":
        na = np.sqrt((center * center).sum(axis=2))
        nb = np.sqrt((surround * surround).sum(axis=2))
        dot = (center * surround).sum(axis=2)
        denom = na * nb
        ok = denom > 0.0
        cosv = np.where(ok, dot / np.where(ok, denom, 1.0), 1.0)
        return np.arccos(np.clip(cosv, -1.0, 1.0))
    raise ValueError(f"unknown distance mode {mode!r}")


def center_surround_maps(pyramid, mode):
    """Contrast maps for centers {1,2} and surrounds {center+2, center+3},
    each upsampled to the level-0 extent."""
    needed = PYRAMID_DEPTH
    if len(pyramid) - 1 < needed:
        raise ValueError(
            f"pyramid depth {len(pyramid) - 1} insufficient; the "
            f"center/surround grid needs {needed}")
    h0, w0 = pyramid[0].shape[:2]
    maps = []
    for c in CENTER_LEVELS:
        center = pyramid[c]
        ch, cw = center.shape[:2]
        for delta in SURROUND_DELTAS:
            surround = kernels.bilinear_forward_numpy(pyramid[c + delta], ch, cw)
            dist = _distance_map(center, surround, mode)
            lifted = kernels.bilinear_forward_numpy(
                np.ascontiguousarray(dist[:, :, None]), h0, w0)[:, :, 0]
            maps.append(lifted)
    return maps


def spectral_gradient(values):
    """Band-wise first difference along the spectral axis."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[2] < 2:
        raise ValueError("spectral gradient needs at least 2 bands")
    return np.diff(values, axis=2)


def classical_saliency(cube, mode):
    """Full-resolution classical saliency in [0,1].

    mode 'sed': Euclidean contrast on the raw cube.
    mode 'sg':  spectral-angle contrast on the spectral gradient cube.
    Returns (map, degenerate_flag); a constant contrast sum normalizes to all
    zeros with a warning.
    """
    values = cube.values if isinstance(cube, HsiCube) else cube
    values = np.asarray(values, dtype=np.float64)
    if mode == "sed":
        pyramid = gaussian_pyramid(values, PYRAMID_DEPTH)
        maps = center_surround_maps(pyramid, "euclidean")
    elif mode == "sg":
        pyramid = gaussian_pyramid(spectral_gradient(values), PYRAMID_DEPTH)
        maps = center_surround_maps(pyramid, "angle")
    else:
        raise ValueError(f"unknown baseline mode {mode!r}; use 'sed' or 'sg'")
    total = maps[0].copy()
    for m in maps[1:]:
        total += m
    lo = total.min()
    hi = total.max()
    if hi - lo < NORM_EPS:
        warnings.warn("contrast map is constant; returning all zeros",
                      DegenerateMapWarning)
        return np.zeros_like(total), True
    return (total - lo) / (hi - lo + NORM_EPS), False
