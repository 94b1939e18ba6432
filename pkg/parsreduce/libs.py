import json
from pathlib import Path

import numpy as np
from tqdm import tqdm
from p_tqdm import p_map


def parallel_map(fn, items, nr_threads=1, quiet=True, desc=None):
    """
    Map fn over items, keeping the input order of the results.

    nr_threads > 1 uses a p_tqdm process pool; otherwise a plain loop with a tqdm bar.
    """
    items = list(items)
    if nr_threads > 1 and len(items) > 1:
        return p_map(fn, items, num_cpus=nr_threads, disable=quiet, desc=desc)
    return [fn(x) for x in tqdm(items, disable=quiet, desc=desc)]


def to_jsonable(obj):
    """Convert numpy containers and scalars to plain python for json.dump."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value  # enums
    return obj


def save_json(obj, file_out):
    with open(file_out, "w") as f:
        json.dump(to_jsonable(obj), f, indent=4)
