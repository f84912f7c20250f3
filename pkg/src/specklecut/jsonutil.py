"""Schema-stable JSON output: sorted keys, floats at 6 significant digits."""

import json

import numpy as np


def json_ready(obj):
    """Recursively convert to plain JSON types with rounded floats."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.6g}")
    return obj


def dump_json(obj) -> str:
    return json.dumps(json_ready(obj), sort_keys=True, indent=2) + "\n"
