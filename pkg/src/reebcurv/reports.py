"""Deterministic report emission: JSON summaries and CSV grids.

Re-running with an identical config reproduces summary.json byte for byte
apart from the ``timestamp`` field; floats are written at full round-trip
precision.
"""

from __future__ import annotations

import json
import os
import time
from typing import Sequence

import numpy as np

__all__ = ["write_summary", "write_json", "write_csv"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_summary(out_dir: str, payload: dict, stamp: bool = True) -> str:
    os.makedirs(out_dir, exist_ok=True)
    body = dict(payload)
    if stamp:
        body["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    path = os.path.join(out_dir, "summary.json")
    write_json(path, body)
    return path


def write_csv(path: str, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    cols = [np.asarray(c).ravel() for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns must have equal length")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
