"""Flat-binary array export with a JSON metadata sidecar.

Arrays are written as little-endian float64 in C order to ``<base>.bin``;
everything needed to reinterpret them (shape, grid, seeds, times) goes to
``<base>.json``.  Loading verifies the byte count against the metadata.
"""

import json
import os

import numpy as np

from .errors import ConfigurationError

MAGIC = "fracflow-binary-v1"


def write_array(base: str, values: np.ndarray, meta: dict) -> tuple:
    bin_path, meta_path = str(base) + ".bin", str(base) + ".json"
    arr = np.ascontiguousarray(values, dtype="<f8")
    arr.tofile(bin_path)
    record = {"format": MAGIC, "dtype": "<f8", "order": "C",
              "shape": list(arr.shape)}
    record.update(meta)
    with open(meta_path, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return bin_path, meta_path


def read_array(base: str) -> tuple:
    bin_path, meta_path = str(base) + ".bin", str(base) + ".json"
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("format") != MAGIC:
        raise ConfigurationError(f"{meta_path}: not a {MAGIC} record")
    shape = tuple(meta["shape"])
    expected = int(np.prod(shape)) * 8
    actual = os.path.getsize(bin_path)
    if actual != expected:
        raise ConfigurationError(
            f"{bin_path}: has {actual} bytes, metadata implies {expected}"
        )
    values = np.fromfile(bin_path, dtype="<f8").reshape(shape)
    return values, meta
