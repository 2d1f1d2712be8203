"""Master time grids, nested partitions of [r, T] and the delayed interpolation L_n.

Every partition is stored as a list of indices into one master grid, so knot
membership is an integer test and coarse interpolations live on the same
index set as fine solutions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

_RTOL = 1e-12


class GridError(ValueError):
    """Raised for malformed grids, partitions or off-grid times."""


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing grid on [0, T] containing the delay point r."""

    r: float
    T: float
    points: np.ndarray
    index_of_r: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise GridError("grid needs at least two points")
        if not 0.0 <= self.r < self.T:
            raise GridError(f"need 0 <= r < T, got r={self.r}, T={self.T}")
        if pts[0] != 0.0 or pts[-1] != self.T:
            raise GridError("grid must start at 0 and end at T")
        if np.any(np.diff(pts) <= 0):
            raise GridError("grid points must be strictly increasing")
        if pts[self.index_of_r] != self.r:
            raise GridError("index_of_r does not point at r")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_active(cls, r: float, T: float, active: Sequence[float]) -> "TimeGrid":
        """Build a grid from its points on [r, T]; [0, r) gets uniform steps
        no wider than the first active step."""
        r, T = float(r), float(T)
        if not r < T:
            raise GridError(f"need r < T, got r={r}, T={T}")
        act = np.asarray(active, dtype=float)
        if act[0] != r or act[-1] != T:
            raise GridError("active points must run from r to T")
        if r > 0.0:
            n_pre = max(1, math.ceil(r / (act[1] - act[0]) - 1e-9))
            pre = np.linspace(0.0, r, n_pre + 1)[:-1]
            pts = np.concatenate([pre, act])
        else:
            pre = np.empty(0)
            pts = act
        return cls(r, T, pts, pre.size)

    @classmethod
    def uniform(cls, r: float, T: float, n_intervals: int) -> "TimeGrid":
        if n_intervals < 1:
            raise GridError("n_intervals must be >= 1")
        if not r < T:
            raise GridError(f"need r < T, got r={r}, T={T}")
        return cls.from_active(r, T, _uniform_points(r, T, n_intervals))

    def __len__(self):
        return self.points.size

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    @cached_property
    def dt(self) -> np.ndarray:
        d = np.diff(self.points)
        d.setflags(write=False)
        return d

    @cached_property
    def active_mask(self) -> np.ndarray:
        """True for master intervals inside [r, T]."""
        m = np.arange(self.n_intervals) >= self.index_of_r
        m.setflags(write=False)
        return m

    @property
    def mesh(self) -> float:
        return float(self.dt[self.index_of_r:].max())

    def index(self, s: float) -> int:
        """Master index of the grid time s; raises for off-grid times."""
        j = int(np.searchsorted(self.points, s))
        for cand in (j - 1, j):
            if 0 <= cand < self.points.size and math.isclose(
                self.points[cand], s, rel_tol=_RTOL, abs_tol=_RTOL * max(1.0, self.T)
            ):
                return cand
        raise GridError(f"time {s!r} is not a grid point")

    def has_point(self, s: float) -> bool:
        try:
            self.index(s)
        except GridError:
            return False
        return True


def _uniform_points(r: float, T: float, n: int) -> np.ndarray:
    pts = r + (T - r) * np.arange(n + 1) / n
    pts[-1] = T
    return pts


@dataclass(frozen=True, eq=False)
class Partition:
    """A partition r = t_0 < ... < t_k = T whose knots are master grid points."""

    grid: TimeGrid
    knot_indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.knot_indices)
        if len(idx) < 2:
            raise GridError("a partition needs at least one interval")
        if idx[0] != self.grid.index_of_r or idx[-1] != self.grid.n_intervals:
            raise GridError("first knot must be r and last knot T")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise GridError("knot indices must be strictly increasing")
        object.__setattr__(self, "knot_indices", idx)

    @property
    def k(self) -> int:
        return len(self.knot_indices) - 1

    @cached_property
    def knots(self) -> np.ndarray:
        t = self.grid.points[list(self.knot_indices)]
        t.setflags(write=False)
        return t

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.knots)

    @property
    def mesh(self) -> float:
        return float(self.gaps.max())

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min())

    def interval_index(self, s: float, left_open: bool = False) -> int:
        """Index i of the knot interval holding s.

        Right-open [t_i, t_{i+1}) by default, with s = T mapped to k. With
        ``left_open`` the convention is (t_i, t_{i+1}] and s = r maps to 0.
        """
        r, T = self.grid.r, self.grid.T
        if not (r - _RTOL <= s <= T + _RTOL):
            raise GridError(f"time {s} outside [r, T] = [{r}, {T}]")
        t = self.knots
        if left_open:
            i = int(np.searchsorted(t, s, side="left")) - 1
            return max(i, 0)
        if s >= T:
            return self.k
        return int(np.searchsorted(t, s, side="right")) - 1

    def neighbors(self, s: float) -> tuple[float, float, float]:
        """(predecessor, left knot, successor) of s; (t_{k-1}, T, T) at s = T."""
        i = self.interval_index(s)
        t = self.knots
        if i == self.k:
            return float(t[-2]), float(t[-1]), float(t[-1])
        return float(t[max(i - 1, 0)]), float(t[i]), float(t[i + 1])

    def gamma(self, s: float) -> float:
        """Step ratio Δt_i / Δt_{i+1} on [t_i, t_{i+1}); 1 at T, 0 on [t_0, t_1)."""
        i = self.interval_index(s)
        if i == self.k:
            return 1.0
        t = self.knots
        prev = t[i] - t[max(i - 1, 0)]
        return float(prev / (t[i + 1] - t[i]))

    @cached_property
    def _interp_plan(self):
        # L_n(x)[j] = x[a_j] + w_j * (x[b_j] - x[a_j]) on master indices j
        g = self.grid
        n = len(g)
        kn = self.knot_indices
        a = np.arange(n)
        b = np.arange(n)
        w = np.zeros(n)
        a[g.index_of_r:] = g.index_of_r
        b[g.index_of_r:] = g.index_of_r
        pts = g.points
        for i in range(1, self.k):
            lo, hi = kn[i], kn[i + 1]
            js = np.arange(lo + 1, hi + 1)
            a[js] = kn[i - 1]
            b[js] = kn[i]
            w[js] = (pts[js] - pts[lo]) / (pts[hi] - pts[lo])
        return a, b, w

    @cached_property
    def _slope_plan(self):
        # slope of L_n(x) on master interval (t_j, t_{j+1}] is (x[c_j] - x[e_j]) / q_j
        g = self.grid
        kn = self.knot_indices
        c = np.zeros(g.n_intervals, dtype=int)
        e = np.zeros(g.n_intervals, dtype=int)
        q = np.ones(g.n_intervals)
        on = np.zeros(g.n_intervals, dtype=bool)
        pts = g.points
        for i in range(1, self.k):
            lo, hi = kn[i], kn[i + 1]
            js = np.arange(lo, hi)
            c[js], e[js] = kn[i], kn[i - 1]
            q[js] = pts[hi] - pts[lo]
            on[js] = True
        return c, e, q, on

    def interpolate(self, values: np.ndarray) -> np.ndarray:
        """Apply L_n to grid values of shape (..., len(grid), m)."""
        values = np.asarray(values, dtype=float)
        if values.shape[-2] != len(self.grid):
            raise GridError(
                f"path has {values.shape[-2]} samples, grid has {len(self.grid)}"
            )
        a, b, w = self._interp_plan
        xa = values[..., a, :]
        return xa + w[:, None] * (values[..., b, :] - xa)

    def master_slopes(self, values: np.ndarray) -> np.ndarray:
        """Derivative of L_n(x) on each master interval, shape (..., N, m)."""
        values = np.asarray(values, dtype=float)
        if values.shape[-2] != len(self.grid):
            raise GridError(
                f"path has {values.shape[-2]} samples, grid has {len(self.grid)}"
            )
        c, e, q, on = self._slope_plan
        s = (values[..., c, :] - values[..., e, :]) / q[:, None]
        return np.where(on[:, None], s, 0.0)


@dataclass(frozen=True, eq=False)
class PartitionSequence:
    """Nested partitions of increasing refinement with balance constants."""

    partitions: tuple[Partition, ...]
    c_T: float
    c_T_bar: float | None = None
    oversampling: int = field(default=1)

    def __post_init__(self):
        parts = tuple(self.partitions)
        if not parts:
            raise GridError("empty partition sequence")
        grid = parts[0].grid
        if any(p.grid is not grid for p in parts):
            raise GridError("all partitions must share one master grid")
        if self.c_T < 1:
            raise GridError("balance constant c_T must be >= 1")
        for n, p in enumerate(parts, 1):
            if p.mesh > self.c_T * p.min_gap * (1 + 1e-9):
                raise GridError(f"partition {n} is not balanced with c_T={self.c_T}")
            if self.c_T_bar is not None and p.k * p.mesh > self.c_T_bar * (1 + 1e-9):
                raise GridError(f"partition {n} violates k_n |T_n| <= {self.c_T_bar}")
        object.__setattr__(self, "partitions", parts)

    @property
    def grid(self) -> TimeGrid:
        return self.partitions[0].grid

    def __len__(self):
        return len(self.partitions)

    def __getitem__(self, n):
        return self.partitions[n]

    def __iter__(self):
        return iter(self.partitions)

    def to_dict(self) -> dict:
        out = {
            "r": self.grid.r,
            "T": self.grid.T,
            "c_T": self.c_T,
            "levels": [[float(t) for t in p.knots] for p in self.partitions],
        }
        if self.c_T_bar is not None:
            out["c_T_bar"] = self.c_T_bar
        out["oversampling"] = self.oversampling
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PartitionSequence":
        r, T = float(data["r"]), float(data["T"])
        levels = [np.asarray(lv, dtype=float) for lv in data["levels"]]
        over = int(data.get("oversampling", 1))
        finest = max(levels, key=len)
        active = [finest[0]]
        for lo, hi in zip(finest[:-1], finest[1:]):
            for j in range(1, over + 1):
                active.append(hi if j == over else lo + (hi - lo) * j / over)
        grid = TimeGrid.from_active(r, T, active)
        parts = tuple(
            Partition(grid, tuple(grid.index(t) for t in lv)) for lv in levels
        )
        return cls(parts, float(data["c_T"]), data.get("c_T_bar"), over)

    @classmethod
    def from_json(cls, text: str) -> "PartitionSequence":
        return cls.from_dict(json.loads(text))


def make_dyadic_sequence(
    r: float, T: float, levels: int, base_intervals: int, oversampling: int = 1
) -> PartitionSequence:
    """Nested equidistant partitions with k_n = base_intervals * 2**(n-1).

    The master grid refines the finest partition by ``oversampling``.
    """
    if levels < 1 or base_intervals < 1 or oversampling < 1:
        raise GridError("levels, base_intervals and oversampling must be >= 1")
    if not r < T:
        raise GridError(f"need r < T, got r={r}, T={T}")
    k_max = base_intervals * 2 ** (levels - 1)
    grid = TimeGrid.uniform(r, T, k_max * oversampling)
    i_r = grid.index_of_r
    parts = []
    for n in range(1, levels + 1):
        k = base_intervals * 2 ** (n - 1)
        stride = (k_max // k) * oversampling
        parts.append(Partition(grid, tuple(i_r + stride * i for i in range(k + 1))))
    c_T_bar = (T - r) * (1 + 1 / base_intervals)
    return PartitionSequence(tuple(parts), 1.0, c_T_bar, oversampling)


def partition_from_knots(grid: TimeGrid, knots: Sequence[float]) -> Partition:
    return Partition(grid, tuple(grid.index(t) for t in knots))


# module-level conveniences mirroring the methods


def neighbors(p: Partition, s: float) -> tuple[float, float, float]:
    return p.neighbors(s)


def gamma(p: Partition, s: float) -> float:
    return p.gamma(s)


def interpolate_Ln(p: Partition, x):
    """Delayed linear interpolation of a GridPath along the partition."""
    from .paths import GridPath

    if x.grid is not p.grid:
        raise GridError("path and partition live on different grids")
    return GridPath(p.grid, p.interpolate(x.values))


def slope_Ln(p: Partition, x, s: float) -> np.ndarray:
    """Derivative of L_n(x) at s using the (t_i, t_{i+1}] convention."""
    i = p.interval_index(s, left_open=True)
    if i == 0:
        return np.zeros(x.values.shape[:-2] + (x.dim,))
    kn = p.knot_indices
    num = x.values[..., kn[i], :] - x.values[..., kn[i - 1], :]
    return num / (p.knots[i + 1] - p.knots[i])
