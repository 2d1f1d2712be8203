"""Non-anticipative functionals F(t, s, x) and their horizontal/vertical derivatives.

A functional wraps ``fn(t, s, x)`` where ``t`` is a 1-D array of output times,
``s`` a scalar and ``x`` a GridPath already stopped at ``s``. ``fn`` returns
an array broadcastable to ``x.batch_shape + t.shape + shape``. Evaluating
over a vector of ``t`` for fixed ``s`` is what makes the Volterra solvers
O(N^2) instead of O(N^3).

Vertical bumps x + h 1_{[s,T]} are realised by shifting grid samples at times
>= s; no càdlàg path objects are built.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .paths import GridPath, stop_path, sup_norm


class EvaluationError(ArithmeticError):
    """A functional produced non-finite values where finite ones are required."""


def _batch_reshape(a, batch_shape, trailing: int):
    a = np.asarray(a, dtype=float)
    return a.reshape(batch_shape + (1,) * trailing) if a.ndim else a


class Functional:
    """Non-anticipative map (t, s, x) -> R^shape.

    ``dx`` optionally gives the analytic vertical derivative with trailing
    axis of length m; ``dt`` the derivative in the first time argument. Both
    use the same calling convention as ``fn``.
    """

    is_zero = False
    # optional (kernel, core) with F(t,s,x) = kernel(t,s) * core(s,x); lets the
    # solver push one kernel row per step instead of a full evaluation
    split = None

    def __init__(
        self,
        fn: Callable,
        shape,
        dx: Optional[Callable] = None,
        dt: Optional[Callable] = None,
        name: str = "",
    ):
        self.fn = fn
        self.shape = tuple(int(k) for k in shape)
        self.dx = dx
        self.dt = dt
        self.name = name or getattr(fn, "__name__", "functional")

    def __repr__(self):
        return f"Functional({self.name}, shape={self.shape})"

    @property
    def analytic_derivatives_available(self) -> bool:
        return self.dx is not None

    def _target(self, t, x, extra=()):
        return x.batch_shape + t.shape + self.shape + extra

    def evaluate(self, t, s: float, x: GridPath) -> np.ndarray:
        """Evaluate on a path the caller guarantees is stopped at s."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.asarray(self.fn(tt, s, x), dtype=float)
        return np.broadcast_to(out, self._target(tt, x))

    def evaluate_dx(self, t, s: float, x: GridPath) -> np.ndarray:
        """Vertical gradient on a stopped path, analytic when available."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self.dx is None:
            return _fd_vertical(self, tt, s, x, None)
        out = np.asarray(self.dx(tt, s, x), dtype=float)
        return np.broadcast_to(out, self._target(tt, x, (x.dim,)))

    def evaluate_dt(self, t, s: float, x: GridPath) -> np.ndarray:
        if self.dt is None:
            raise NotImplementedError(f"{self.name} has no time derivative")
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        return np.broadcast_to(np.asarray(self.dt(tt, s, x), dtype=float), self._target(tt, x))

    def __call__(self, t, s: float, x: GridPath) -> np.ndarray:
        """Evaluate after stopping x at s, so the result ignores x after s."""
        out = self.evaluate(t, s, stop_path(x, s))
        return _squeeze_t(out, t, x)

    # linear combinations keep analytic derivatives when every part has them

    def __add__(self, other: "Functional") -> "Functional":
        if other.is_zero:
            return self
        if self.is_zero:
            return other
        _check_shape(self, other)
        return _Sum(self, other)

    def __neg__(self) -> "Functional":
        return _Scaled(-1.0, self)

    def __sub__(self, other: "Functional") -> "Functional":
        return self + (-other)

    def __rmul__(self, a: float) -> "Functional":
        if self.is_zero or a == 0:
            return zero(self.shape)
        return _Scaled(float(a), self)


def _squeeze_t(out, t, x):
    if np.ndim(t) == 0:
        return out[(slice(None),) * len(x.batch_shape) + (0,)]
    return out


def _check_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


class _Sum(Functional):
    def __init__(self, a: Functional, b: Functional):
        self.a, self.b = a, b
        dx = (lambda t, s, x: a.evaluate_dx(t, s, x) + b.evaluate_dx(t, s, x)) if (
            a.dx is not None and b.dx is not None
        ) else None
        dt = (lambda t, s, x: a.evaluate_dt(t, s, x) + b.evaluate_dt(t, s, x)) if (
            a.dt is not None and b.dt is not None
        ) else None
        super().__init__(
            lambda t, s, x: a.evaluate(t, s, x) + b.evaluate(t, s, x),
            a.shape, dx, dt, f"({a.name} + {b.name})",
        )


class _Scaled(Functional):
    def __init__(self, c: float, f: Functional):
        self.c, self.f = c, f
        dx = (lambda t, s, x: c * f.evaluate_dx(t, s, x)) if f.dx is not None else None
        dt = (lambda t, s, x: c * f.evaluate_dt(t, s, x)) if f.dt is not None else None
        super().__init__(
            lambda t, s, x: c * f.evaluate(t, s, x), f.shape, dx, dt, f"{c:g}*{f.name}"
        )


class _Zero(Functional):
    is_zero = True

    def __init__(self, shape):
        z = lambda t, s, x: 0.0  # noqa: E731
        super().__init__(z, shape, z, z, "0")


def zero(shape) -> Functional:
    return _Zero(shape)


def constant(value) -> Functional:
    """Functional independent of (t, s, x)."""
    v = np.asarray(value, dtype=float)
    z = lambda t, s, x: 0.0  # noqa: E731
    return Functional(lambda t, s, x: v, v.shape, z, z, "const")


# finite differences


def _default_eps(x: GridPath, scale: float) -> np.ndarray:
    return scale * (1.0 + np.asarray(sup_norm(x)))


def _bumped(x: GridPath, j: int, k: int, h) -> GridPath:
    v = x.values.copy()
    h = np.asarray(h, dtype=float)
    v[..., j:, k] += h[..., None] if h.ndim else h
    return GridPath(x.grid, v)


def _fd_vertical(F: Functional, t, s, x, eps):
    j = x.grid.index(s)
    eps = _default_eps(x, 1e-5) if eps is None else np.asarray(eps, dtype=float)
    div = 2.0 * _batch_reshape(eps, x.batch_shape, 1 + len(F.shape))
    cols = []
    for k in range(x.dim):
        fp = F.evaluate(t, s, _bumped(x, j, k, eps))
        fm = F.evaluate(t, s, _bumped(x, j, k, -eps))
        cols.append((fp - fm) / div)
    return np.stack(cols, axis=-1)


def vertical_derivative(F: Functional, t, s: float, x: GridPath, eps=None) -> np.ndarray:
    """Central difference of h -> F(t, s, x + h e_k 1_{[s,T]}) in every direction k.

    Returns the output shape of F with a trailing axis of length m. The
    default step is 1e-5 * (1 + ||x^s||_inf).
    """
    xs = stop_path(x, s)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = _fd_vertical(F, tt, s, xs, eps)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite vertical derivative of {F.name} at s={s}")
    return _squeeze_t(out, t, x)


def second_vertical_derivative(F: Functional, t, s: float, x: GridPath, eps=None) -> np.ndarray:
    """Nested central differences; trailing (m, m) block per output entry."""
    xs = stop_path(x, s)
    j = x.grid.index(s)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    eps = _default_eps(xs, 1e-4) if eps is None else np.asarray(eps, dtype=float)
    div = 4.0 * _batch_reshape(eps, x.batch_shape, 1 + len(F.shape)) ** 2
    m = x.dim
    rows = []
    for k in range(m):
        row = []
        for l in range(m):
            vals = {}
            for a in (1, -1):
                for b in (1, -1):
                    y = _bumped(_bumped(xs, j, k, a * eps), j, l, b * eps)
                    vals[a, b] = F.evaluate(tt, s, y)
            row.append((vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / div)
        rows.append(np.stack(row, axis=-1))
    out = np.stack(rows, axis=-2)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite second vertical derivative of {F.name} at s={s}")
    return _squeeze_t(out, t, x)


def horizontal_derivative(F: Functional, t, s: float, x: GridPath, eps: float = 1e-6) -> np.ndarray:
    """Forward difference of h -> F(t, s + h, x^s) at h = 0.

    The shifted time s + h is generally off-grid; the stopped path is flat
    there, which is all F can see.
    """
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(s + eps >= tt):
        raise ValueError("need s + eps < t")
    xs = stop_path(x, s)
    f1 = F.evaluate(tt, s + eps, xs)
    f0 = F.evaluate(tt, s, xs)
    out = (f1 - f0) / eps
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite horizontal derivative of {F.name} at s={s}")
    return _squeeze_t(out, t, x)


def schwarz_asymmetry(hess: np.ndarray) -> float:
    """Largest relative asymmetry of the trailing (m, m) blocks."""
    diff = np.abs(hess - np.swapaxes(hess, -1, -2)).max()
    scale = max(1.0, float(np.abs(hess).max()))
    return float(diff / scale)
