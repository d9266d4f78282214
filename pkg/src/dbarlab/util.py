"""Small shared plumbing: canonical JSON, digests, PGM output, thread maps.

Everything that writes run artifacts funnels through these helpers so that
identical inputs produce byte-identical files regardless of thread count.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

SCHEMA_VERSION = 1


def as_complex_pair(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def from_complex_pair(pair) -> complex:
    re, im = pair
    return complex(float(re), float(im))


def jsonify(obj):
    """Recursively convert numpy scalars/arrays and complex numbers to JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return as_complex_pair(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def json_dumps(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline.

    NaN/inf are rejected; callers encode unbounded quantities as null plus a flag.
    """
    return json.dumps(jsonify(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> str:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json_dumps(obj))
    return str(path)


def config_digest(config: dict) -> str:
    canon = json.dumps(jsonify(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("ascii")).hexdigest()


def write_pgm(path, values: np.ndarray, vmax: float | None = None) -> str:
    """8-bit binary PGM (P5) heatmap, values linearly mapped from [0, vmax] to [0, 255]."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValueError("PGM heatmap needs a 2-d array")
    if vmax is None:
        vmax = float(v.max()) if v.size else 0.0
    if vmax > 0:
        pix = np.rint(np.clip(v / vmax, 0.0, 1.0) * 255.0).astype(np.uint8)
    else:
        pix = np.zeros(v.shape, dtype=np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())
    return str(path)


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map fn over items, optionally on a thread pool, preserving input order.

    Jobs must be pure; the output list is assembled in input order so the result
    (and anything serialized from it) is identical for every thread count.
    """
    items = list(items)
    if threads < 0:
        raise ValueError("threads must be >= 0")
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
