"""Deterministic CSV and JSON writers."""

import json
import math
from pathlib import Path

import numpy as np


def _fmt(v):
    return "%.17g" % v


def write_csv(path, header, columns):
    """Write equal-length numeric columns with 17 significant digits and LF endings."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len({c.size for c in cols}) > 1:
        raise ValueError("CSV columns must have equal length")
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in zip(*cols))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_bytes(dumps(obj).encode("utf-8"))
