"""Dataset directory access: scene pairs written by the generator (or any
cube files following the same header/payload format), with the standard
preprocessing chain (radiometric scaling, resampling to the model side)."""

import glob
import json
import os

from .cube import load_cube, resize_cube, scale_radiometric


def list_scenes(data_dir):
    """Header paths, manifest order when a manifest exists, else sorted glob."""
    manifest_path = os.path.join(data_dir, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        return [os.path.join(data_dir, entry["header"]) for entry in manifest["scenes"]]
    headers = sorted(glob.glob(os.path.join(data_dir, "*.hdr")))
    if not headers:
        raise FileNotFoundError(f"no cube headers (*.hdr) found in {data_dir}")
    return headers


def load_sample(header_path, side=None):
    """Load one (cube, gt), apply 1/10000 scaling to raw cubes, and resample."""
    data_path = os.path.splitext(header_path)[0] + ".dat"
    cube, gt = load_cube(header_path, data_path)
    if not cube.scaled:
        cube = scale_radiometric(cube)
    if side is not None and (cube.height, cube.width) != (side, side):
        cube, gt = resize_cube(cube, gt, side)
    return cube, gt


def load_dataset(data_dir, side=None, limit=None):
    headers = list_scenes(data_dir)
    if limit is not None:
        headers = headers[:limit]
    return [load_sample(h, side) for h in headers]


def split_train_test(samples, train_count):
    if train_count >= len(samples):
        raise ValueError(
            f"train_count {train_count} must leave test samples out of {len(samples)}")
    return samples[:train_count], samples[train_count:]
