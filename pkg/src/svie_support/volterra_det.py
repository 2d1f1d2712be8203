"""Deterministic support flow h -> x_h and its diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coeffs import CoefficientSet
from .engine import BLOWUP_THRESHOLD, BlowUpError, volterra_euler
from .paths import DriverPath, GridPath, sobolev_norm
from .timegrid import TimeGrid

DRIVER_CAP = 4096


class LatticeTooLarge(ValueError):
    pass


def _check(c: CoefficientSet, xhat: GridPath, h: DriverPath):
    if xhat.grid is not h.grid:
        raise ValueError("initial segment and driver live on different grids")
    if xhat.dim != c.m:
        raise ValueError(f"initial segment has dimension {xhat.dim}, coefficients need {c.m}")
    if h.dim != c.d:
        raise ValueError(f"driver has dimension {h.dim}, coefficients need {c.d}")


def solve_support_vie(
    c: CoefficientSet, xhat: GridPath, h: DriverPath, threshold: float = BLOWUP_THRESHOLD
) -> GridPath:
    """x_h(t) = x_h(r) + int_r^t (b - rho/2)(t,s,x_h) ds + int_r^t sigma(t,s,x_h) dh(s).

    Left-point rectangles for both integrals; x_h equals xhat on [0, r].
    A batched driver gives a batched solution. Unbatched solves raise
    BlowUpError on blow-up; batched ones censor the offending paths.
    """
    _check(c, xhat, h)
    terms = [
        (c.b, xhat.grid.dt),
        ((-0.5) * c.rho, xhat.grid.dt),
        (c.sigma, h.increments()),
    ]
    return volterra_euler(
        xhat, terms, h.batch_shape, threshold, raise_on_blowup=not h.batch_shape
    )


def solve_support_vie_mild(c: CoefficientSet, xhat: GridPath, h: DriverPath) -> GridPath:
    """Cross-check: explicit Euler on the integro-differential (mild) form.

    x' (t) = F(t,t,x) + int_r^t d/dt F(t,u,x) du with F = b - rho_bar/2 + sigma h'.
    Needs the kernel-separable structure for d/dt rho_bar; the diagonal value of
    rho_bar uses the continuous extension K_sigma(t,t)^2 * (d_x sigmabar sigmabar)(t,x).
    """
    ks = c.separable
    if ks is None:
        raise NotImplementedError("mild-form stepping needs kernel-separable coefficients")
    if ks.dx_sigmabar is None:
        raise NotImplementedError("mild-form stepping needs an analytic d_x sigmabar")
    _check(c, xhat, h)
    grid = xhat.grid
    N, ir, pts, dt = grid.n_intervals, grid.index_of_r, grid.points, grid.dt
    m = c.m
    batch = h.batch_shape
    x = np.broadcast_to(xhat.values, batch + (N + 1, m)).copy()
    memory = np.zeros(batch + (N + 1, m))  # int_r^{t_j} d/dt F(t_j, u, x) du, pushed forward
    for j in range(ir, N):
        t = pts[j]
        xp = GridPath(grid, np.where(np.arange(N + 1)[:, None] > j, x[..., j : j + 1, :], x))
        bb = np.asarray(ks.bbar(t, xp))
        sb = np.asarray(ks.sigmabar(t, xp))
        ds = np.asarray(ks.dx_sigmabar(t, xp))
        g = np.einsum("...kld,...dl->...k", ds, sb)
        hd = np.einsum("...kl,...l->...k", sb, h.slopes[..., j, :])
        tj = np.array([t])
        Kss = ks.K_sigma(tj, t)[0]
        diag = ks.K_b(tj, t)[0] * bb - 0.5 * Kss * Kss * g + Kss * hd
        x[..., j + 1, :] = x[..., j, :] + dt[j] * (diag + memory[..., j, :])
        fut = pts[j + 1 :]
        contrib = (
            ks.dK_b(fut, t)[:, None] * bb[..., None, :]
            - 0.5 * (ks.dK_sigma(fut, t) * Kss)[:, None] * g[..., None, :]
            + ks.dK_sigma(fut, t)[:, None] * hd[..., None, :]
        )
        memory[..., j + 1 :, :] += contrib * dt[j]
    return GridPath(grid, x)


@dataclass
class FlowResult:
    paths: list
    ratios: list  # (i, j, ratio or None when the drivers coincide)
    p: float

    @property
    def max_ratio(self) -> float | None:
        vals = [r for _, _, r in self.ratios if r is not None]
        return max(vals) if vals else None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n_drivers": len(self.paths),
            "lipschitz_ratios": [{"i": i, "j": j, "ratio": r} for i, j, r in self.ratios],
            "max_ratio": self.max_ratio,
        }


def flow_map(
    c: CoefficientSet, xhat: GridPath, drivers: Sequence[DriverPath], p: float = 2.0
) -> FlowResult:
    """Solve the support equation for every driver (batched) plus Lipschitz ratios.

    Ratio for a pair (g, h) is ||x_g - x_h||_{1,p,r} / ||g - h||_{1,p,r};
    pairs of identical drivers are skipped with ratio None.
    """
    drivers = list(drivers)
    if not drivers:
        return FlowResult([], [], p)
    grid = xhat.grid
    slopes = np.stack([np.broadcast_to(h.slopes, (grid.n_intervals, c.d)) for h in drivers])
    batched = DriverPath.from_slopes(grid, slopes)
    sol = solve_support_vie(c, xhat, batched)
    if not np.all(np.isfinite(sol.values)):
        bad = int(np.flatnonzero(~sol.is_finite())[0])
        first = np.flatnonzero(~np.isfinite(sol.values[bad]).all(axis=-1))[0]
        raise BlowUpError(float(grid.points[first]), f"driver {bad} blew up")
    paths = [GridPath(grid, sol.values[k]) for k in range(len(drivers))]
    ratios = []
    for i, j in itertools.combinations(range(len(drivers)), 2):
        gi, gj = drivers[i], drivers[j]
        diff = DriverPath(grid, gi.initial - gj.initial, gi.slopes - gj.slopes)
        den = sobolev_norm(diff, p)
        if den == 0.0:
            ratios.append((i, j, None))
            continue
        ratios.append((i, j, float(sobolev_norm(paths[i] - paths[j], p) / den)))
    return FlowResult(paths, ratios, p)


def driver_lattice(
    grid: TimeGrid,
    coarse_knots: int,
    slope_levels: Sequence[float],
    d: int,
    cap: int = DRIVER_CAP,
) -> list[DriverPath]:
    """All drivers with the given slopes on each interval of a uniform coarse
    partition of [r, T] (coarse boundaries snapped to master indices)."""
    if coarse_knots < 1:
        raise ValueError("coarse_knots must be >= 1")
    levels = [float(v) for v in slope_levels]
    count = len(levels) ** (coarse_knots * d) if levels else 0
    if count > cap:
        raise LatticeTooLarge(f"{count} drivers exceed the cap of {cap}")
    if not levels:
        return []
    ir, N = grid.index_of_r, grid.n_intervals
    bounds = [ir + round(q * (N - ir) / coarse_knots) for q in range(coarse_knots + 1)]
    if len(set(bounds)) != len(bounds):
        raise ValueError("coarse partition is finer than the master grid")
    out = []
    for combo in itertools.product(levels, repeat=coarse_knots * d):
        choice = np.asarray(combo).reshape(coarse_knots, d)
        slopes = np.zeros((N, d))
        for q in range(coarse_knots):
            slopes[bounds[q] : bounds[q + 1]] = choice[q]
        out.append(DriverPath.from_slopes(grid, slopes))
    return out
