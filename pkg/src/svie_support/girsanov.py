"""Shifted Brownian drivers and Girsanov densities for the reweighted support limit.

For a driver h and partition T_n the shifted path y solves
    y(t) = x(t) - int_r^{r v t} (h'(s) - L_n(y)'(s)) ds,
which is explicit because L_n(y)' on (t_i, t_{i+1}] only sees y at knots <= t_i.
The density uses the previsible integrand a = h' - L_n(y)' with left-point
sums, so its discrete version is an exact martingale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .stats import MCEstimate
from .paths import DriverPath, GridPath
from .timegrid import Partition
from .volterra_sde import BrownianPath

_LOG_MAX = 700.0


@dataclass(frozen=True, eq=False)
class ShiftedDriver:
    W: BrownianPath
    h: DriverPath
    level: int
    shifted: GridPath
    Z_T: np.ndarray
    log_Z: np.ndarray
    overflow: np.ndarray


def _shift_integrand(h: DriverPath, p: Partition, values: np.ndarray):
    """Forward substitution; returns (y values, integrand a on master intervals)."""
    grid = p.grid
    if h.grid is not grid:
        raise ValueError("driver and partition live on different grids")
    ir, N, dt = grid.index_of_r, grid.n_intervals, grid.dt
    c, e, q, on = p._slope_plan
    x = np.asarray(values, dtype=float)
    hdot = np.broadcast_to(h.slopes, x.shape[:-2] + h.slopes.shape[-2:])
    y = x.copy()
    a = np.zeros(x.shape[:-2] + (N, x.shape[-1]))
    running = np.zeros(x.shape[:-2] + (x.shape[-1],))
    for j in range(ir, N):
        Ld = (y[..., c[j], :] - y[..., e[j], :]) / q[j] if on[j] else 0.0
        a[..., j, :] = hdot[..., j, :] - Ld
        running = running + a[..., j, :] * dt[j]
        y[..., j + 1, :] = x[..., j + 1, :] - running
    return y, a


def solve_shifted_driver(h: DriverPath, p: Partition, x: GridPath) -> GridPath:
    """Running-value solution y with y = x on [0, r]."""
    if x.dim != h.dim:
        raise ValueError("path and driver dimensions differ")
    y, _ = _shift_integrand(h, p, x.values)
    return GridPath(x.grid, y)


def shift_and_weight(h: DriverPath, p: Partition, W: BrownianPath, level: int = 0) -> ShiftedDriver:
    y, a = _shift_integrand(h, p, W.values)
    dW = W.increments()
    dt = p.grid.dt
    log_Z = (a * dW).sum(axis=(-2, -1)) - 0.5 * ((a * a).sum(axis=-1) * dt).sum(axis=-1)
    overflow = np.asarray(log_Z > _LOG_MAX)
    with np.errstate(over="ignore"):
        Z = np.where(overflow, np.nan, np.exp(np.minimum(log_Z, _LOG_MAX)))
    if np.any(overflow):
        warnings.warn(f"{int(overflow.sum())} density values overflow; only log_Z is valid there")
    return ShiftedDriver(W, h, level, GridPath(p.grid, y), Z, np.asarray(log_Z), overflow)


def density_terminal(h: DriverPath, p: Partition, W: BrownianPath):
    """(Z_T, log Z_T) per path; Z_T is NaN where exp overflows."""
    sd = shift_and_weight(h, p, W)
    Z, lZ = sd.Z_T, sd.log_Z
    if np.ndim(Z) == 0:
        return float(Z), float(lZ)
    return Z, lZ


@dataclass(frozen=True)
class ReweightedEstimate:
    raw: MCEstimate
    self_normalized: MCEstimate

    def to_dict(self) -> dict:
        return {"raw": self.raw.to_dict(), "self_normalized": self.self_normalized.to_dict()}


def reweighted_probability(event_indicator, weights) -> ReweightedEstimate:
    """P_{h,n}(A) = E[1_A Z_T] as a raw weighted mean, plus the self-normalised ratio."""
    ind = np.asarray(event_indicator, dtype=float).ravel()
    Z = np.asarray(weights, dtype=float).ravel()
    if ind.size == 0:
        raise ValueError("empty sample")
    if ind.shape != Z.shape:
        raise ValueError("indicators and weights differ in length")
    raw = MCEstimate.from_samples(ind * Z)
    n = Z.size
    zbar = Z.mean()
    p_hat = float((ind * Z).sum() / Z.sum())
    if n > 1:
        var = np.mean((Z * (ind - p_hat)) ** 2) / zbar**2
        se = float(np.sqrt(var / n))
    else:
        se = 0.0
    return ReweightedEstimate(raw, MCEstimate.from_moments(n, p_hat, se))
