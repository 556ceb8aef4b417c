"""JSON/CSV serialization, fingerprints and run manifests."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

from .errors import ValidationError

#: bump when a CSV column set or order changes
CSV_SCHEMA_VERSION = 1

SAMPLE_COLUMNS = ("model", "tau", "T_star", "L_star", "L_hat")
CURVE_COLUMNS = ("model", "tau", "T", "objective", "lhs", "rhs", "feasible", "fit_star", "fit_hat")
SWEEP_COLUMNS = ("model", "tau", "rho", "objective", "lhs", "rhs", "feasible")
BUDGET_COLUMNS = ("model", "mhz", "tau_g", "tau", "feasible")
TRAJECTORY_COLUMNS = ("t", "x_norm", "u0", "cumulative_cost")
GAP_COLUMNS = ("run", "gap", "deployed_cost", "baseline_cost")


def fmt(v):
    """17 significant digits for floats; booleans as 0/1."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return "" if v is None else str(v)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from exc


def write_csv(path, columns, rows):
    """Write dict rows with a fixed column order; extra keys are rejected."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            extra = set(row) - set(columns)
            if extra:
                raise ValidationError(f"unexpected CSV fields {sorted(extra)}")
            w.writerow([fmt(row.get(c)) for c in columns])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def matrix_to_csv(M):
    """Row-major CSV: header ``rows,cols`` then one line per row."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{M.shape[0]},{M.shape[1]}"]
    lines += [",".join(fmt(v) for v in row) for row in M]
    return "\n".join(lines) + "\n"


def matrix_from_csv(text):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    try:
        r, c = (int(v) for v in lines[0].split(","))
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"malformed matrix CSV: {exc}") from exc
    if data.shape != (r, c):
        raise ValidationError(f"matrix CSV header says {r}x{c}, data is {data.shape}")
    return data


def versions():
    import scipy

    from . import __version__

    return {"dmplqr": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def manifest(command, config, fingerprint, files=()):
    return {"command": command, "config": to_jsonable(config), "fingerprint": fingerprint,
            "csv_schema_version": CSV_SCHEMA_VERSION, "versions": versions(),
            "files": sorted(str(f) for f in files)}
