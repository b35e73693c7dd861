"""Deterministic JSON reports."""
import json
import math
import os

import numpy as np

from ._defaults import DEFAULTS


def jsonable(obj):
    """Convert numpy values (and NaN/inf) into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def defaults_table():
    return jsonable(DEFAULTS)


def dumps(report):
    """Serialise with sorted keys and no timestamps, so equal runs give equal bytes."""
    return json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write(report, path=None):
    text = dumps(report)
    if path is None or path == "-":
        import sys
        sys.stdout.write(text)
    else:
        with open(os.fspath(path), "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
