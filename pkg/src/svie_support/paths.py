"""Grid-sampled paths, stopping, and the delayed Hölder / Sobolev norms.

All norms here are evaluated on the master grid. They are discrete surrogates
of the continuum quantities and approach them from below as the grid refines.
Arrays may carry leading batch dimensions: values have shape (..., N+1, m).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .timegrid import GridError, TimeGrid


@dataclass(frozen=True, eq=False)
class GridPath:
    """R^m-valued path(s) sampled at every master grid point."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim < 2 or v.shape[-2] != len(self.grid):
            raise GridError(
                f"values of shape {v.shape} do not match a grid of {len(self.grid)} points"
            )
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.values.shape[:-2]

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def at(self, s: float) -> np.ndarray:
        """Value at time s, shape batch + (m,); linear between grid points."""
        pts = self.grid.points
        j = int(np.searchsorted(pts, s))
        if j < pts.size and pts[j] == s:
            return self.values[..., j, :]
        if self.grid.has_point(s):
            return self.values[..., self.grid.index(s), :]
        if j == 0 or j >= pts.size:
            raise GridError(f"time {s} outside [0, {self.grid.T}]")
        w = (s - pts[j - 1]) / (pts[j] - pts[j - 1])
        lo = self.values[..., j - 1, :]
        return lo + w * (self.values[..., j, :] - lo)

    def is_finite(self) -> np.ndarray:
        return np.isfinite(self.values).all(axis=(-2, -1))

    def __getitem__(self, item) -> "GridPath":
        """Select along the batch dimensions."""
        if not self.batch_shape:
            raise IndexError("unbatched path")
        return GridPath(self.grid, self.values[item])

    def __sub__(self, other: "GridPath") -> "GridPath":
        _same_grid(self, other)
        return GridPath(self.grid, self.values - other.values)

    def __add__(self, other: "GridPath") -> "GridPath":
        _same_grid(self, other)
        return GridPath(self.grid, self.values + other.values)

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "GridPath":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.broadcast_to(v, (len(grid), v.size)).copy())

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "GridPath":
        vals = np.array([np.atleast_1d(fn(t)) for t in grid.points], dtype=float)
        return cls(grid, vals)


def _same_grid(a, b):
    if a.grid is not b.grid:
        raise GridError("paths live on different grids")


@dataclass(frozen=True, eq=False)
class DriverPath:
    """Piecewise-linear h in W_r^{1,p}: fixed values on [0, r], slopes on [r, T].

    ``slopes`` has shape (..., N, d) with one entry per master interval;
    entries for intervals before r are ignored and kept at zero.
    """

    grid: TimeGrid
    initial: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        g = self.grid
        init = np.asarray(self.initial, dtype=float)
        sl = np.array(self.slopes, dtype=float)
        if init.ndim == 1:
            init = init[:, None]
        if sl.ndim == 1:
            sl = sl[:, None]
        if init.shape[-2] != g.index_of_r + 1:
            raise GridError("initial segment must cover the grid points in [0, r]")
        if sl.shape[-2] != g.n_intervals:
            raise GridError("need one slope per master interval")
        if init.shape[-1] != sl.shape[-1]:
            raise GridError("initial segment and slopes disagree on dimension")
        sl[..., : g.index_of_r, :] = 0.0
        sl.setflags(write=False)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "slopes", sl)

    @property
    def dim(self) -> int:
        return self.slopes.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.slopes.shape[:-2]

    def increments(self) -> np.ndarray:
        """h(t_{j+1}) - h(t_j) on each master interval, shape (..., N, d)."""
        return self.slopes * self.grid.dt[:, None]

    def values(self) -> np.ndarray:
        g = self.grid
        inc = self.increments()[..., g.index_of_r:, :]
        start = self.initial[..., -1:, :]
        tail = start + np.cumsum(inc, axis=-2)
        init = np.broadcast_to(self.initial, tail.shape[:-2] + self.initial.shape[-2:])
        return np.concatenate([init, tail], axis=-2)

    def as_path(self) -> GridPath:
        return GridPath(self.grid, self.values())

    @classmethod
    def zero(cls, grid: TimeGrid, d: int) -> "DriverPath":
        return cls(grid, np.zeros((grid.index_of_r + 1, d)), np.zeros((grid.n_intervals, d)))

    @classmethod
    def linear(cls, grid: TimeGrid, slope, h_r=None) -> "DriverPath":
        """h(t) = h_r + slope * (t - r) on [r, T], constant h_r before r."""
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        h_r = np.zeros_like(slope) if h_r is None else np.atleast_1d(h_r).astype(float)
        init = np.broadcast_to(h_r, (grid.index_of_r + 1, slope.size))
        return cls(grid, init, np.broadcast_to(slope, (grid.n_intervals, slope.size)))

    @classmethod
    def from_slopes(cls, grid: TimeGrid, slopes, initial=None) -> "DriverPath":
        slopes = np.asarray(slopes, dtype=float)
        d = slopes.shape[-1]
        if initial is None:
            initial = np.zeros((grid.index_of_r + 1, d))
        return cls(grid, initial, slopes)

    @classmethod
    def from_values(cls, grid: TimeGrid, values) -> "DriverPath":
        """Piecewise-linear interpolant of grid values of shape (..., N+1, d)."""
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        slopes = np.diff(v, axis=-2) / grid.dt[:, None]
        return cls(grid, v[..., : grid.index_of_r + 1, :], slopes)


def stop_path(x: GridPath, s: float) -> GridPath:
    """The path t -> x(s ∧ t); s must be a grid point."""
    j = x.grid.index(s)
    v = x.values.copy()
    v[..., j + 1 :, :] = v[..., j : j + 1, :]
    return GridPath(x.grid, v)


def sup_norm(x: GridPath) -> np.ndarray | float:
    n = np.linalg.norm(x.values, axis=-1).max(axis=-1)
    return float(n) if np.ndim(n) == 0 else n


def _stopped_sup(values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    return np.linalg.norm(values[..., : grid.index_of_r + 1, :], axis=-1).max(axis=-1)


def hoelder_seminorm(values: np.ndarray, times: np.ndarray, alpha: float) -> np.ndarray:
    """max over pairs s != t of |x(s) - x(t)| / |s - t|**alpha.

    Scans every lag, so the cost is O(M^2) per path for M samples.
    """
    values = np.asarray(values, dtype=float)
    M = values.shape[-2]
    best = np.zeros(values.shape[:-2])
    for lag in range(1, M):
        num = np.linalg.norm(values[..., lag:, :] - values[..., :-lag, :], axis=-1)
        if alpha > 0:
            num = num / (times[lag:] - times[:-lag]) ** alpha
        np.maximum(best, num.max(axis=-1), out=best)
    return best


def hoelder_norm(x: GridPath, alpha: float, method: str = "pairs"):
    """Delayed α-Hölder norm: sup of x on [0, r] plus the seminorm on [r, T].

    ``alpha == 0`` returns the sup norm. ``method="adjacent"`` is the exact
    O(N) shortcut and is only accepted for ``alpha == 1``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return sup_norm(x)
    g = x.grid
    head = _stopped_sup(x.values, g)
    vals = x.values[..., g.index_of_r :, :]
    times = g.points[g.index_of_r :]
    if method == "adjacent":
        if alpha != 1.0:
            raise ValueError("the adjacent-slope shortcut is exact only for alpha = 1")
        semi = (np.linalg.norm(np.diff(vals, axis=-2), axis=-1) / np.diff(times)).max(axis=-1)
    elif method == "pairs":
        semi = hoelder_seminorm(vals, times, alpha)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = head + semi
    return float(out) if np.ndim(out) == 0 else out


def sobolev_norm(h, p: float):
    """Delayed Sobolev L^p norm of a piecewise-linear path.

    Accepts a DriverPath or a GridPath (read as its linear interpolant); the
    integral of |h'|^p is then an exact finite sum.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if isinstance(h, GridPath):
        h = DriverPath.from_values(h.grid, h.values)
    g = h.grid
    head = np.linalg.norm(h.initial, axis=-1).max(axis=-1)
    speed = np.linalg.norm(h.slopes[..., g.index_of_r :, :], axis=-1)
    dt = g.dt[g.index_of_r :]
    if np.isinf(p):
        tail = speed.max(axis=-1)
    else:
        tail = ((speed**p) * dt).sum(axis=-1) ** (1.0 / p)
    out = head + tail
    return float(out) if np.ndim(out) == 0 else out


def d_infty(t: float, x: GridPath, s: float, y: GridPath):
    """|t - s|^{1/2} + ||x^t - y^s||_inf."""
    _same_grid(x, y)
    lo, hi = x.grid.r, x.grid.T
    for u in (s, t):
        if not lo <= u <= hi:
            raise GridError(f"time {u} outside [r, T]")
    diff = stop_path(x, t).values - stop_path(y, s).values
    out = abs(t - s) ** 0.5 + np.linalg.norm(diff, axis=-1).max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def stack_paths(paths: Sequence[GridPath]) -> GridPath:
    grid = paths[0].grid
    for p in paths:
        _same_grid(p, paths[0])
    return GridPath(grid, np.stack([p.values for p in paths]))
