"""Brownian drivers and coupled Euler schemes for the stochastic Volterra equations.

Each Monte Carlo path owns an RNG stream seeded by (seed, path index), so
results do not depend on chunking or worker count. All levels of a
partition sequence are solved on one master grid against the same Brownian
sample, which couples them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coeffs import CoefficientSet, GeneralCoefficients
from .engine import BLOWUP_THRESHOLD, volterra_euler
from .paths import DriverPath, GridPath
from .timegrid import Partition, PartitionSequence, TimeGrid


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """W sampled on the master grid, flat (zero) on [0, r]."""

    grid: TimeGrid
    values: np.ndarray  # (..., N+1, d)
    seed: int = 0
    path_ids: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.values.shape[:-2]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=-2)

    def as_path(self) -> GridPath:
        return GridPath(self.grid, self.values)


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(path_id)])


def sample_brownian(
    grid: TimeGrid,
    d: int,
    seed: int,
    n_paths: int | None = None,
    path_offset: int = 0,
) -> BrownianPath:
    """Exact N(0, dt I_d) increments on master intervals in [r, T].

    Path k of the batch uses stream (seed, path_offset + k). Without
    ``n_paths`` a single unbatched path with id ``path_offset`` is returned.
    """
    ir, N = grid.index_of_r, grid.n_intervals
    sd = np.sqrt(grid.dt[ir:])[:, None]
    ids = [path_offset] if n_paths is None else list(range(path_offset, path_offset + n_paths))
    vals = np.zeros((len(ids), N + 1, d))
    for row, pid in enumerate(ids):
        inc = path_rng(seed, pid).standard_normal((N - ir, d)) * sd
        vals[row, ir + 1 :] = np.cumsum(inc, axis=0)
    if n_paths is None:
        vals = vals[0]
    return BrownianPath(grid, vals, int(seed), tuple(ids))


def _grid_check(xhat: GridPath, W: BrownianPath):
    if xhat.grid is not W.grid:
        raise ValueError("initial segment and Brownian path live on different grids")


def solve_svie(
    c: CoefficientSet, xhat: GridPath, W: BrownianPath, threshold: float = BLOWUP_THRESHOLD
) -> GridPath:
    """Left-point Euler for X_t = X_r + int b(t,s,X) ds + int sigma(t,s,X) dW_s."""
    _grid_check(xhat, W)
    if W.dim != c.d:
        raise ValueError(f"Brownian dimension {W.dim} != d = {c.d}")
    terms = [(c.b, xhat.grid.dt), (c.sigma, W.increments())]
    return volterra_euler(xhat, terms, W.batch_shape, threshold)


def _h_increments(g: GeneralCoefficients, grid: TimeGrid):
    if g.B_H.is_zero:
        return np.zeros((grid.n_intervals, g.d))
    if g.h is None:
        raise ValueError("B_H is non-zero but no driver h was given")
    return g.h.increments()


def solve_sequence_vie(
    g: GeneralCoefficients,
    xhat: GridPath,
    W: BrownianPath,
    p: Partition,
    threshold: float = BLOWUP_THRESHOLD,
) -> GridPath:
    """Euler scheme for the equation driven by both L_n(W)' ds and dW.

    Drift B_under + B_H h' + B_bar nW', diffusion Sigma. The slope of
    L_n(W) is constant on each master interval, so the ds-integral against it
    is resolved exactly at master resolution.
    """
    _grid_check(xhat, W)
    grid = xhat.grid
    nW_inc = p.master_slopes(W.values) * grid.dt[:, None]
    terms = [
        (g.B_under, grid.dt),
        (g.B_H, _h_increments(g, grid)),
        (g.B_bar, nW_inc),
        (g.Sigma, W.increments()),
    ]
    return volterra_euler(xhat, terms, W.batch_shape, threshold)


def solve_general_vie(
    g: GeneralCoefficients,
    xhat: GridPath,
    W: BrownianPath,
    threshold: float = BLOWUP_THRESHOLD,
) -> GridPath:
    """Euler scheme for the limit equation: drift B_under + R + B_H h', diffusion B_bar + Sigma."""
    _grid_check(xhat, W)
    grid = xhat.grid
    terms = [
        (g.B_under, grid.dt),
        (g.R, grid.dt),
        (g.B_H, _h_increments(g, grid)),
        (g.B_bar + g.Sigma, W.increments()),
    ]
    return volterra_euler(xhat, terms, W.batch_shape, threshold)


def solve_svie_semimartingale(c: CoefficientSet, xhat: GridPath, W: BrownianPath) -> GridPath:
    """Cross-check: Euler on the SDE form dX = B_t(X) dt + sigma(t,t,X) dW_t with
    B_t = b(t,t,X) + int_r^t d_t b(t,u,X) du + int_r^t d_t sigma(t,u,X) dW_u."""
    if c.b.dt is None or c.sigma.dt is None:
        raise NotImplementedError("needs time derivatives of b and sigma")
    _grid_check(xhat, W)
    grid = xhat.grid
    N, ir, pts, dt = grid.n_intervals, grid.index_of_r, grid.points, grid.dt
    dW = W.increments()
    batch = W.batch_shape
    m = c.m
    x = np.broadcast_to(xhat.values, batch + (N + 1, m)).copy()
    memory = np.zeros(batch + (N + 1, m))
    for j in range(ir, N):
        t = pts[j]
        x[..., j + 1 :, :] = x[..., j : j + 1, :]
        xp = GridPath(grid, x)
        tj = np.array([t])
        bd = c.b.evaluate(tj, t, xp)[..., 0, :]
        sd = c.sigma.evaluate(tj, t, xp)[..., 0, :, :]
        noise = np.einsum("...kl,...l->...k", sd, dW[..., j, :])
        x[..., j + 1, :] = x[..., j, :] + (bd + memory[..., j, :]) * dt[j] + noise
        fut = pts[j + 1 :]
        db = c.b.evaluate_dt(fut, t, xp)
        dsig = c.sigma.evaluate_dt(fut, t, xp)
        memory[..., j + 1 :, :] += db * dt[j] + np.einsum("...kl,...l->...k", dsig, dW[..., j, None, :])
    return GridPath(grid, x)


@dataclass(frozen=True, eq=False)
class CoupledSolutionPair:
    Y_n: GridPath
    Y: GridPath
    W: BrownianPath
    level: int
    partition: Partition


def couple(
    g: GeneralCoefficients,
    xhat: GridPath,
    seed: int,
    pseq: PartitionSequence,
    n_paths: int = 1,
    path_offset: int = 0,
    threshold: float = BLOWUP_THRESHOLD,
) -> list[CoupledSolutionPair]:
    """Solve every level and the limit equation against one shared W.

    The limit solution Y does not depend on the level and is solved once.
    """
    grid = pseq.grid
    if xhat.grid is not grid:
        raise ValueError("initial segment must live on the sequence's master grid")
    W = sample_brownian(grid, g.d, seed, n_paths, path_offset)
    Y = solve_general_vie(g, xhat, W, threshold)
    return [
        CoupledSolutionPair(solve_sequence_vie(g, xhat, W, p, threshold), Y, W, n, p)
        for n, p in enumerate(pseq, 1)
    ]


def driver_from_brownian(p: Partition, W: BrownianPath) -> DriverPath:
    """L_n(W) as a (batched) driver path."""
    return DriverPath.from_slopes(W.grid, p.master_slopes(W.values))


def brownian_from_values(grid: TimeGrid, values: Sequence) -> BrownianPath:
    return BrownianPath(grid, np.asarray(values, dtype=float))
