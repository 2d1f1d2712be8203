"""Monte Carlo summaries and log-log rate fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class MCEstimate:
    n_samples: int
    mean: float
    std_error: float
    ci95: tuple[float, float]
    censored: int = 0

    @classmethod
    def from_samples(cls, samples, censored: int = 0) -> "MCEstimate":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("no samples")
        mean = float(x.mean())
        se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
        return cls.from_moments(x.size, mean, se, censored)

    @classmethod
    def from_moments(cls, n: int, mean: float, se: float, censored: int = 0) -> "MCEstimate":
        return cls(int(n), float(mean), float(se), (mean - Z95 * se, mean + Z95 * se), int(censored))

    def contains(self, value: float, k: float = 3.0) -> bool:
        """True when value lies within k standard errors of the mean."""
        return abs(self.mean - value) <= k * self.std_error

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "mean": self.mean,
            "std_error": self.std_error,
            "ci95": list(self.ci95),
            "censored": self.censored,
        }


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    band: tuple[float, float]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "band": list(self.band)}


def _wls(x, y, w):
    W = w.sum()
    xm, ym = (w * x).sum() / W, (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return slope, ym - slope * xm


def fit_rate(
    levels: Sequence[tuple[float, MCEstimate]], n_boot: int = 2000, seed: int = 0
) -> RateFit:
    """Weighted least squares of log(mean) on log(mesh).

    Weights are 1 / (relative standard error)^2, the delta-method variance of
    log(mean). The band is the 2.5-97.5% range of slopes refitted to level
    means redrawn from N(mean, se).
    """
    if len(levels) < 3:
        raise ValueError("need at least 3 levels")
    mesh = np.array([float(h) for h, _ in levels])
    means = np.array([e.mean for _, e in levels])
    ses = np.array([e.std_error for _, e in levels])
    if np.any(means <= 0) or np.any(mesh <= 0):
        raise ValueError("rate fit needs positive means and meshes")
    x = np.log(mesh)
    rel = ses / means
    w = 1.0 / np.maximum(rel, 1e-12) ** 2 if np.all(rel > 0) else np.ones_like(rel)
    slope, intercept = _wls(x, np.log(means), w)
    if np.all(ses == 0):
        return RateFit(float(slope), float(intercept), (float(slope), float(slope)))
    rng = np.random.default_rng(seed)
    draws = means + ses * rng.standard_normal((n_boot, means.size))
    draws = np.maximum(draws, means * 1e-6)
    boot = np.array([_wls(x, np.log(row), w)[0] for row in draws])
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return RateFit(float(slope), float(intercept), (float(lo), float(hi)))
