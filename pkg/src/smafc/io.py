"""Serialization helpers: canonical JSON, matrix encoding, atomic file writes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .array import CountRecord
from .quantum import ProcessMatrix


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True) + "\n"


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# matrices

def matrix_to_dict(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("only square matrices are serialized")
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_dict(d: dict) -> np.ndarray:
    try:
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError("matrix JSON needs 're' and 'im' arrays") from exc
    m = re + 1j * im
    if m.ndim != 2 or m.shape != (d.get("dim", m.shape[0]),) * 2:
        raise ValueError(f"matrix JSON has shape {m.shape}, expected square of dim {d.get('dim')}")
    return m


def load_process_matrix(path) -> ProcessMatrix:
    d = read_json(path)
    if "chi" in d:
        d = d["chi"]
    return ProcessMatrix(matrix_from_dict(d))


# ---------------------------------------------------------------------------
# tables and counts

def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def dicts_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    header = list(rows[0])
    return rows_to_csv(header, [[r[k] for k in header] for r in rows])


def counts_to_json(records) -> list[dict]:
    return [r.to_dict() for r in records]


def counts_from_json(data) -> list[CountRecord]:
    """Accepts full records or the minimal ``{setting_id, input_id, counts}`` form."""
    out = []
    for d in data:
        counts = d["counts"]
        counts = [counts] if np.isscalar(counts) else list(counts)
        bins = d.get("time_bins") or [[float(k), 1.0] for k in range(len(counts))]
        out.append(CountRecord(d["setting_id"], tuple(map(tuple, bins)), tuple(counts), d.get("trials", 1),
                               d.get("seed", 0), d.get("mu", 0.0), d.get("input_id")))
    return out
