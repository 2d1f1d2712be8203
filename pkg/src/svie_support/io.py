"""File formats: path CSV and binary dumps, JSON reports, weight and driver CSVs."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .paths import DriverPath, GridPath
from .timegrid import TimeGrid

_HEADER = struct.Struct("<QQ")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_path_csv(path: Path | str, x: GridPath) -> None:
    """Columns t, x_1..x_m; one unbatched path per file."""
    if x.batch_shape:
        raise ValueError("write one path per CSV file")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{k + 1}" for k in range(x.dim)])
        for t, row in zip(x.grid.points, x.values):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def read_path_csv(path: Path | str) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def write_path_binary(path: Path | str, x: GridPath) -> None:
    """Little-endian uint64 header (m, N) then float64 times and values for each path.

    Layout per record: N+1 times followed by (N+1) * m values, row major.
    Batched paths are written as consecutive records after one header.
    """
    vals = x.values.reshape((-1,) + x.values.shape[-2:])
    N = x.grid.n_intervals
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(x.dim, N))
        times = x.grid.points.astype("<f8").tobytes()
        for v in vals:
            fh.write(times)
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def read_path_binary(path: Path | str) -> tuple[np.ndarray, np.ndarray]:
    """Returns (times (N+1,), values (records, N+1, m))."""
    raw = Path(path).read_bytes()
    m, N = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    rec = (N + 1) * (m + 1)
    if body.size % rec:
        raise ValueError("truncated binary path dump")
    body = body.reshape(-1, rec)
    return body[0, : N + 1].copy(), body[:, N + 1 :].reshape(-1, N + 1, m).copy()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path: Path | str, obj) -> None:
    """Sorted keys and fixed formatting so reruns produce identical bytes."""
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


def write_rows_csv(path: Path | str, rows: Sequence[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in row.items()})


def write_weights_csv(path: Path | str, path_ids: Iterable[int], log_Z) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "log_Z"])
        for pid, lz in zip(path_ids, np.ravel(log_Z)):
            w.writerow([int(pid), _fmt(lz)])


def read_driver_csv(path: Path | str, grid: TimeGrid) -> DriverPath:
    """Driver given by values (columns t, h_1..h_d), linearly interpolated onto the grid."""
    t, h = read_path_csv(path)
    if np.any(np.diff(t) <= 0):
        raise ValueError("driver times must be strictly increasing")
    if t[0] > grid.points[0] + 1e-12 or t[-1] < grid.T - 1e-12:
        raise ValueError("driver file must cover [0, T]")
    vals = np.stack([np.interp(grid.points, t, h[:, k]) for k in range(h.shape[1])], axis=-1)
    return DriverPath.from_values(grid, vals)
