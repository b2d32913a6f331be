"""Serialization: per-observable CSV series, JSON summaries, binary field checkpoints.

Checkpoint layout (little-endian throughout)::

    b"HSIG1"                    5-byte magic
    uint32 N, uint32 d
    uint32 dims[d]
    uint64 seed, uint64 sweep
    float64 spins[V][N + 1]     row-major, V = prod(dims)

The gauge-fixing choice is not part of the header, so loading takes the
LatticeSpec and checks it against the stored N and dims.
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .lattice import LatticeError, LatticeSpec, SpinField

MAGIC = b"HSIG1"


class ArtifactError(ValueError):
    pass


def fmt(x):
    """Shortest round-trip text for a number; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, columns, rows):
    """CSV with a header row; rows are dicts or sequences in column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            vals = [row[c] for c in columns] if isinstance(row, dict) else list(row)
            if len(vals) != len(columns):
                raise ArtifactError(f"row has {len(vals)} fields, expected {len(columns)}")
            w.writerow([v if isinstance(v, str) else fmt(v) for v in vals])
    return path


def read_csv(path):
    """(columns, rows) with float conversion where possible."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        columns = next(r)
        rows = []
        for raw in r:
            row = {}
            for c, v in zip(columns, raw):
                try:
                    row[c] = float(v) if v != "" else None
                except ValueError:
                    row[c] = v
            rows.append(row)
    return columns, rows


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    # non-finite floats become null so the files stay strict JSON
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return None
    return o


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, default=_json_default, allow_nan=False)
        fh.write("\n")
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_run_record(rec, outdir):
    """One CSV per observable (sweep_index, value) plus summary.json.

    Returns the list of written paths.
    """
    outdir = Path(outdir)
    paths = []
    for name in sorted(rec.series):
        x = rec.series[name]
        paths.append(write_csv(outdir / "series" / f"{name}.csv", ["sweep_index", "value"],
                               zip(rec.sweep_index.tolist(), np.asarray(x).tolist())))
    paths.append(write_json(outdir / "summary.json", rec.summary()))
    return paths


def read_series(path):
    """(sweep_index, value) arrays from a per-observable CSV."""
    _, rows = read_csv(path)
    idx = np.array([int(r["sweep_index"]) for r in rows], dtype=np.int64)
    val = np.array([r["value"] for r in rows], dtype=float)
    return idx, val


# -- checkpoints ------------------------------------------------------------------

def save_checkpoint(field: SpinField, path):
    spec = field.spec
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = MAGIC + struct.pack("<II", spec.N, spec.d) + struct.pack(f"<{spec.d}I", *spec.dims)
    head += struct.pack("<QQ", int(field.seed) % 2**64, int(field.sweep))
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(field.spins, dtype="<f8").tobytes())
    os.replace(tmp, path)
    return path


def read_checkpoint(path):
    """Raw header fields and spin array: dict(N, dims, seed, sweep, spins)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:5] != MAGIC:
        raise ArtifactError("not an HSIG1 checkpoint (bad magic)")
    off = 5
    try:
        N, d = struct.unpack_from("<II", data, off)
        off += 8
        if not 1 <= d <= 3:
            raise ArtifactError(f"checkpoint has invalid lattice dimension {d}")
        dims = struct.unpack_from(f"<{d}I", data, off)
        off += 4 * d
        seed, sweep = struct.unpack_from("<QQ", data, off)
        off += 16
    except struct.error:
        raise ArtifactError("truncated checkpoint header") from None
    volume = int(np.prod(dims))
    need = volume * (N + 1) * 8
    if len(data) - off != need:
        raise ArtifactError(f"checkpoint payload has {len(data) - off} bytes, expected {need}")
    spins = np.frombuffer(data, dtype="<f8", offset=off).reshape(volume, N + 1).astype(float)
    return {"N": int(N), "dims": tuple(int(x) for x in dims), "seed": int(seed), "sweep": int(sweep),
            "spins": spins}


def load_checkpoint(path, spec: LatticeSpec) -> SpinField:
    raw = read_checkpoint(path)
    if raw["N"] != spec.N or raw["dims"] != spec.dims:
        raise ArtifactError(f"checkpoint is N={raw['N']} dims={raw['dims']}, spec is N={spec.N} dims={spec.dims}")
    try:
        return SpinField(spec, raw["spins"], seed=raw["seed"], sweep=raw["sweep"])
    except LatticeError as exc:
        raise ArtifactError(f"checkpoint does not match the gauge fixing: {exc}") from None
