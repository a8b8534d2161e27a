"""Long-format CSV files for paths, targets and signature features.

Paths file::

    sample_id,time,c1,...,cd
    0,0.0,0.43,1.2
    0,0.5,...

Rows are grouped by sample and strictly increasing in time within a sample.
Targets file::

    sample_id,y

Floats are written with ``repr`` so a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .paths import SampledPath
from .signature import SigShape, word_labels

__all__ = [
    "write_paths_csv",
    "write_targets_csv",
    "write_signature_csv",
    "write_json",
    "read_paths_csv",
    "read_targets_csv",
    "ingest_csv",
    "atomic_output",
]


@contextmanager
def atomic_output(path, mode: str = "w"):
    """Write to a temporary file and move it into place only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="", encoding="utf-8") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def write_paths_csv(path, paths: Sequence[SampledPath], sample_ids=None) -> None:
    paths = list(paths)
    if not paths:
        raise DataError("no paths to write")
    d = paths[0].d
    ids = list(range(len(paths))) if sample_ids is None else list(sample_ids)
    with atomic_output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "time"] + [f"c{k + 1}" for k in range(d)])
        for sid, sp in zip(ids, paths):
            if sp.d != d:
                raise DataError(f"sample {sid} has dimension {sp.d}, expected {d}")
            for t, row in zip(sp.times, sp.values):
                w.writerow([sid, _fmt(t)] + [_fmt(v) for v in row])


def write_targets_csv(path, targets, sample_ids=None) -> None:
    y = np.asarray(targets, dtype=np.float64).ravel()
    ids = list(range(y.size)) if sample_ids is None else list(sample_ids)
    with atomic_output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "y"])
        for sid, v in zip(ids, y):
            w.writerow([sid, _fmt(v)])


def write_signature_csv(path, features: np.ndarray, shape: SigShape, sample_ids=None) -> None:
    """One row per sample; the header names each column by its multi-index."""
    F = np.asarray(features, dtype=np.float64)
    ids = list(range(F.shape[0])) if sample_ids is None else list(sample_ids)
    with atomic_output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + ["S" + label for label in word_labels(shape)])
        for sid, row in zip(ids, F):
            w.writerow([sid] + [_fmt(v) for v in row])


def write_json(path, obj) -> None:
    with atomic_output(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _float(cell: str, path, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{path}:{line}: non-numeric value {cell!r} in column {column!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{path}:{line}: non-finite value {cell!r} in column {column!r}")
    return value


def read_paths_csv(path) -> tuple[list[str], list[SampledPath]]:
    """Read a long-format paths file; returns sample ids (in file order) and paths."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "sample_id" or header[1] != "time":
            raise DataError(f"{path}:1: missing columns; expected header sample_id,time,c1,...,cd, got {','.join(header)}")
        coords = header[2:]
        expected = [f"c{k + 1}" for k in range(len(coords))]
        if coords != expected:
            raise DataError(f"{path}:1: coordinate columns must be {','.join(expected)}, got {','.join(coords)}")
        ids: list[str] = []
        rows: dict[str, tuple[list[float], list[list[float]]]] = {}
        current = None
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} cells, got {len(rec)} (missing columns)")
            sid = rec[0].strip()
            t = _float(rec[1], path, line, "time")
            vals = [_float(c, path, line, name) for c, name in zip(rec[2:], coords)]
            if sid != current:
                if sid in rows:
                    raise DataError(f"{path}:{line}: unsorted file, rows of sample {sid!r} are not contiguous")
                ids.append(sid)
                rows[sid] = ([], [])
                current = sid
            times, values = rows[sid]
            if times and t <= times[-1]:
                raise DataError(f"{path}:{line}: unsorted times for sample {sid!r} ({t!r} after {times[-1]!r})")
            times.append(t)
            values.append(vals)
    if not ids:
        raise DataError(f"{path}: no data rows")
    paths = []
    for sid in ids:
        times, values = rows[sid]
        if len(times) < 2:
            raise DataError(f"{path}: sample {sid!r} has {len(times)} row(s), need at least 2")
        paths.append(SampledPath(times=np.array(times), values=np.array(values)))
    return ids, paths


def read_targets_csv(path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != ["sample_id", "y"]:
            raise DataError(f"{path}:1: missing columns; expected header sample_id,y, got {','.join(header)}")
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 2:
                raise DataError(f"{path}:{line}: expected 2 cells, got {len(rec)} (missing columns)")
            sid = rec[0].strip()
            if sid in out:
                raise DataError(f"{path}:{line}: duplicate sample_id {sid!r}")
            out[sid] = _float(rec[1], path, line, "y")
    return out


def ingest_csv(paths_file, targets_file=None):
    """Load paths and (optionally) targets aligned on ``sample_id``.

    Returns ``(ids, paths, targets)``; ``targets`` is None without a targets file.
    """
    ids, paths = read_paths_csv(paths_file)
    if targets_file is None:
        return ids, paths, None
    table = read_targets_csv(targets_file)
    missing = [sid for sid in ids if sid not in table]
    if missing:
        raise DataError(f"{targets_file}: sample-id mismatch, no target for sample(s) {missing[:5]}")
    extra = sorted(set(table) - set(ids))
    if extra:
        raise DataError(f"{targets_file}: sample-id mismatch, targets for unknown sample(s) {extra[:5]}")
    return ids, paths, np.array([table[sid] for sid in ids])
