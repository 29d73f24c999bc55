"""Chain CSV and JSON writers.

Floats are written with ``repr``, the shortest string that parses back to the
same double, so chain files round-trip exactly and are byte-stable.
"""
import csv
import json
from pathlib import Path

import numpy as np

from ..errors import IngestionError
from .config import _jsonable


def chain_header(dim):
    return ["chain_id", "iteration"] + [f"x_{k + 1}" for k in range(dim)]


def write_chain_csv(path, chain_id, iterations, X):
    X = np.asarray(X, dtype=np.float64)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(chain_header(X.shape[1]))
        for it, row in zip(iterations, X):
            w.writerow([int(chain_id), int(it)] + [repr(float(v)) for v in row])
    return path


def read_chain_csv(path):
    """Returns (chain_ids, iterations, X)."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read chain file {path}: {exc}") from exc
    if not rows or rows[0][:2] != ["chain_id", "iteration"]:
        raise IngestionError(f"{path}: missing chain header")
    dim = len(rows[0]) - 2
    ids, its, X = [], [], []
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != dim + 2:
            raise IngestionError(f"{path}:{n}: expected {dim + 2} fields, got {len(r)}")
        try:
            ids.append(int(r[0]))
            its.append(int(r[1]))
            X.append([float(v) for v in r[2:]])
        except ValueError as exc:
            raise IngestionError(f"{path}:{n}: {exc}") from exc
    X = np.array(X, dtype=np.float64).reshape(len(X), dim)
    return np.array(ids, dtype=np.int64), np.array(its, dtype=np.int64), X


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return path
