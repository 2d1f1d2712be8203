"""Explicit left-point quadrature for path-dependent Volterra equations.

Solves x(t_j) = x(r) + sum_{i<j} sum_terms F(t_j, t_i, x) * inc_i on the
master grid. Non-anticipativity makes this explicit: once x(t_i) is known,
the working buffer holds x stopped at t_i, and each term is evaluated once
for all later output times t_j and pushed into their running sums.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .funcalc import Functional
from .paths import GridPath

BLOWUP_THRESHOLD = 1e12


class BlowUpError(ArithmeticError):
    """A solution left the finite range; ``time`` is the first bad grid time."""

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"solution blew up at t={time}")


def _matvec(v: np.ndarray, inc: np.ndarray) -> np.ndarray:
    # v: (..., k, m, d), inc: (..., d); fixed summation order over d
    out = None
    for l in range(v.shape[-1]):
        term = v[..., l] * inc[..., l][..., None, None]
        out = term if out is None else out + term
    return out


def _core_increment(core: np.ndarray, inc: np.ndarray, vector: bool) -> np.ndarray:
    # core (..., m) with scalar-per-path inc, or core (..., m, d) with inc (..., d)
    if vector:
        return core * np.asarray(inc)[..., None]
    out = None
    for l in range(core.shape[-1]):
        term = core[..., l] * inc[..., l][..., None]
        out = term if out is None else out + term
    return out


def volterra_euler(
    xhat: GridPath,
    terms: Sequence[tuple[Functional, np.ndarray]],
    batch_shape: tuple[int, ...] = (),
    threshold: float = BLOWUP_THRESHOLD,
    raise_on_blowup: bool = False,
) -> GridPath:
    """Run the scheme; each term pairs a functional with its per-interval increments.

    Vector-valued functionals (shape (m,)) take increments broadcastable to
    batch + (N,), matrix-valued ones (shape (m, d)) increments of batch + (N, d).
    Paths whose state becomes non-finite or exceeds ``threshold`` in norm are
    censored: set to NaN from the first bad time on. With ``raise_on_blowup``
    a BlowUpError is raised instead.
    """
    grid = xhat.grid
    if xhat.batch_shape:
        raise ValueError("initial segment must be a single path")
    N, ir, pts = grid.n_intervals, grid.index_of_r, grid.points
    m = xhat.dim
    active = [(F, np.asarray(inc, dtype=float)) for F, inc in terms if not F.is_zero]
    for F, _ in active:
        if F.shape[0] != m:
            raise ValueError(f"{F.name} has {F.shape[0]} rows, state has dimension {m}")

    # time-major working arrays so each push touches one contiguous block
    nb = len(batch_shape)
    buf = np.empty((N + 1,) + batch_shape + (m,))
    buf[: ir + 1] = xhat.values[: ir + 1].reshape((ir + 1,) + (1,) * nb + (m,))
    start = xhat.values[ir].copy()
    buf[ir + 1 :] = start
    acc = np.zeros((N + 1,) + batch_shape + (m,))
    dead = np.zeros(batch_shape, dtype=bool)
    x = GridPath(grid, np.moveaxis(buf, 0, -2))

    with np.errstate(all="ignore"):
        for i in range(ir, N):
            s = pts[i]
            tt = pts[i + 1 :]
            for F, inc in active:
                if F.split is not None:
                    K, core = F.split
                    cv = np.broadcast_to(np.asarray(core(s, x), dtype=float), batch_shape + F.shape)
                    dI = inc[..., i] if len(F.shape) == 1 else inc[..., i, :]
                    g = _core_increment(cv, dI, len(F.shape) == 1)
                    k = np.asarray(K(tt, s), dtype=float).reshape((-1,) + (1,) * (nb + 1))
                    acc[i + 1 :] += k * g
                    continue
                v = F.evaluate(tt, s, x)
                if len(F.shape) == 1:
                    dI = inc[..., i]
                    push = v * dI[..., None, None]
                else:
                    push = _matvec(v, inc[..., i, :])
                acc[i + 1 :] += np.moveaxis(push, nb, 0)
            new = start + acc[i + 1]
            bad = ~np.isfinite(new).all(axis=-1) | (np.linalg.norm(new, axis=-1) > threshold)
            if np.any(bad & ~dead):
                if raise_on_blowup:
                    raise BlowUpError(float(pts[i + 1]))
                dead |= bad
            if np.any(dead):
                new = np.where(dead[..., None], np.nan, new)
            buf[i + 1 :] = new
    return GridPath(grid, np.ascontiguousarray(np.moveaxis(buf, 0, -2)))
