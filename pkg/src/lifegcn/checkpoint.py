"""Versioned JSON checkpoints: named float64 arrays with explicit shapes.

A checkpoint is a flat mapping from array names to row-major float64 data.
JSON keeps floats at full round-trip precision, so save/load is value
exact. Model classes expose to_arrays()/from_arrays() dicts; this module
only moves those dicts to and from disk.
"""

import json

import numpy as np

from .errors import DataError

FORMAT_NAME = "lifegcn-checkpoint"
FORMAT_VERSION = 1


def checkpoint_dict(arrays):
    payload = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        payload[name] = {"shape": list(arr.shape),
                         "data": arr.reshape(-1).tolist()}
    return {"format": FORMAT_NAME, "version": FORMAT_VERSION,
            "arrays": payload}


def arrays_from_dict(doc):
    if doc.get("format") != FORMAT_NAME:
        raise DataError(f"not a checkpoint: format={doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version "
                        f"{doc.get('version')!r}")
    out = {}
    for name, entry in doc["arrays"].items():
        shape = tuple(entry["shape"])
        data = np.array(entry["data"], dtype=np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if data.size != expected:
            raise DataError(f"array {name!r}: {data.size} values for "
                            f"shape {shape}")
        out[name] = np.ascontiguousarray(data.reshape(shape))
    return out


def write_checkpoint(arrays, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(arrays), fh)
        fh.write("\n")


def read_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except ValueError as exc:
            raise DataError(f"{path}: malformed checkpoint: {exc}") from exc
    return arrays_from_dict(doc)
