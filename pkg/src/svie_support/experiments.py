"""Monte Carlo harness for the Wong-Zakai limit and forward/reverse support diagnostics,
plus the explicit moment constants.

Paths are processed in chunks; every path draws from its own (seed, index)
stream and per-path statistics are concatenated in index order before any
reduction, so reports do not depend on chunk size or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .coeffs import CoefficientSet, GeneralCoefficients
from .paths import DriverPath, GridPath, hoelder_norm, hoelder_seminorm
from .stats import MCEstimate, RateFit, fit_rate
from .timegrid import Partition, PartitionSequence
from .volterra_det import flow_map, solve_support_vie
from .volterra_sde import (
    driver_from_brownian,
    sample_brownian,
    solve_general_vie,
    solve_sequence_vie,
    solve_svie,
)

MIN_PATHS = 100


# constants


def kc_constant(alpha: float, p: float, q: float) -> float:
    """Kolmogorov-Chentsov constant 2^{p+q} (2^{q/p - alpha} - 1)^{-p}."""
    if not 0 <= alpha < q / p:
        raise ValueError(f"need 0 <= alpha < q/p = {q / p}, got {alpha}")
    return 2.0 ** (p + q) * (2.0 ** (q / p - alpha) - 1.0) ** (-p)


def gaussian_norm_moment(k: float, d: int) -> float:
    """E|Z|^k for Z ~ N(0, I_d), the chi-distribution moment."""
    if k <= -d:
        raise ValueError("moment diverges")
    return math.exp((k / 2) * math.log(2.0) + math.lgamma((d + k) / 2) - math.lgamma(d / 2))


def w_hat_constant(p: float, q: float, c_T: float, d: int) -> float:
    """E[|Z|^{pq}] c_T^{pq} with Z ~ N(0, I_d)."""
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    k = p * q
    if float(k).is_integer() and k <= 64:
        # exact Gamma ratios keep small integer cases at machine precision
        mom = 2.0 ** (k / 2) * math.gamma((d + k) / 2) / math.gamma(d / 2)
    else:
        mom = gaussian_norm_moment(k, d)
    return mom * c_T**k


def interpolation_constant(p: float, q: float, horizon: float) -> float:
    """c_{p,q} = 2^{p-1} (1 + k_{0,p,q}) (T - r) of the sup-interpolation bound."""
    return 2.0 ** (p - 1) * (1.0 + kc_constant(0.0, p, q)) * horizon


def bdg_constant(p: float) -> float:
    """w_p = ((p^3 / 2) / (p - 1))^{p/2}, for p >= 2."""
    if p < 2:
        raise ValueError("need p >= 2")
    return ((p**3 / 2) / (p - 1)) ** (p / 2)


def lagged_bdg_constant(p: float, c_T: float) -> float:
    """hat w_p = 3^p w_p c_T^{p/2} for integrals against the interpolated driver."""
    return 3.0**p * bdg_constant(p) * c_T ** (p / 2)


# chunked map


def map_chunks(fn: Callable[[int, int], dict], n_paths: int, chunk_size: int, workers: int = 1):
    """Apply fn(offset, count) per chunk and concatenate the dict-of-arrays results in order."""
    chunks = [(o, min(chunk_size, n_paths - o)) for o in range(0, n_paths, chunk_size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: fn(*a), chunks))
    else:
        parts = [fn(o, k) for o, k in chunks]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


# decomposition of the Hölder seminorm along a partition


def seminorm_decomposition(diff: np.ndarray, p: Partition, alpha: float):
    """Full seminorm on [r, T], the worst within-interval seminorm and the
    seminorm over knots t_1..t_k. Always full <= 2 * within + knot."""
    grid = p.grid
    ir = grid.index_of_r
    pts = grid.points
    full = hoelder_seminorm(diff[..., ir:, :], pts[ir:], alpha)
    kn = p.knot_indices
    within = np.zeros(diff.shape[:-2])
    for lo, hi in zip(kn[:-1], kn[1:]):
        np.maximum(within, hoelder_seminorm(diff[..., lo : hi + 1, :], pts[lo : hi + 1], alpha), out=within)
    ks = list(kn[1:])
    knot = hoelder_seminorm(diff[..., ks, :], pts[ks], alpha) if len(ks) > 1 else np.zeros_like(within)
    return full, within, knot


# convergence study


@dataclass
class LevelRecord:
    n: int
    k: int
    mesh: float
    E_max_sq: MCEstimate
    ratio_to_mesh_2alpha: float
    hoelder_sq: MCEstimate
    within_interval: MCEstimate
    knot_level: MCEstimate
    decomposition_violations: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "mesh": self.mesh,
            "E_max_sq": self.E_max_sq.to_dict(),
            "ratio_to_mesh_2alpha": self.ratio_to_mesh_2alpha,
            "hoelder_sq": self.hoelder_sq.to_dict(),
            "within_interval": self.within_interval.to_dict(),
            "knot_level": self.knot_level.to_dict(),
            "decomposition_violations": self.decomposition_violations,
        }


@dataclass
class ConvergenceReport:
    setup: str
    alpha: float
    paths: int
    seed: int
    censored: int
    levels: list[LevelRecord]
    rate: Optional[RateFit]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "setup": self.setup,
            "alpha": self.alpha,
            "paths": self.paths,
            "seed": self.seed,
            "censored": self.censored,
            "levels": [lv.to_dict() for lv in self.levels],
            "rate": self.rate.to_dict() if self.rate else None,
            "notes": list(self.notes),
        }

    def strictly_decreasing_separated(self) -> bool:
        """Level means strictly decrease and consecutive 95% CIs do not overlap."""
        lv = self.levels
        return all(
            b.E_max_sq.mean < a.E_max_sq.mean and b.E_max_sq.ci95[1] < a.E_max_sq.ci95[0]
            for a, b in zip(lv, lv[1:])
        )

    def trend_to_zero(self) -> bool:
        if self.strictly_decreasing_separated():
            return True
        return bool(self.rate and self.rate.slope >= 0.5 and self.rate.band[0] > 0)

    def rows(self) -> list[dict]:
        out = []
        for lv in self.levels:
            out.append({
                "n": lv.n, "k": lv.k, "mesh": lv.mesh,
                "E_max_sq": lv.E_max_sq.mean, "E_max_sq_se": lv.E_max_sq.std_error,
                "E_max_sq_lo": lv.E_max_sq.ci95[0], "E_max_sq_hi": lv.E_max_sq.ci95[1],
                "ratio_to_mesh_2alpha": lv.ratio_to_mesh_2alpha,
                "hoelder_sq": lv.hoelder_sq.mean, "hoelder_sq_se": lv.hoelder_sq.std_error,
                "censored": self.censored,
            })
        return out

    def long_rows(self) -> list[dict]:
        out = []
        for lv in self.levels:
            for name in ("E_max_sq", "hoelder_sq", "within_interval", "knot_level"):
                est = getattr(lv, name)
                out.append({"level": lv.n, "quantity": name, "mean": est.mean,
                            "lo": est.ci95[0], "hi": est.ci95[1]})
        return out


def _check_alpha(alpha: float):
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2), got {alpha}")


def run_convergence_study(
    g: GeneralCoefficients,
    xhat: GridPath,
    pseq: PartitionSequence,
    alpha: float,
    paths: int,
    seed: int,
    chunk_size: int = 1000,
    workers: int = 1,
) -> ConvergenceReport:
    """E max_j |nY - Y|^2 at knots and E ||nY - Y||^2_{alpha,r} per level.

    Paths with a non-finite solution at any level are censored and dropped
    from every level; the count is reported.
    """
    _check_alpha(alpha)
    if paths < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths, got {paths}")
    if pseq.c_T_bar is None:
        raise ValueError("partition sequence must carry the k_n |T_n| bound")
    if xhat.grid is not pseq.grid:
        raise ValueError("initial segment must live on the sequence's master grid")

    L = len(pseq)

    def chunk(offset: int, count: int) -> dict:
        W = sample_brownian(pseq.grid, g.d, seed, count, offset)
        Y = solve_general_vie(g, xhat, W)
        ok = Y.is_finite()
        out = {}
        for n, p in enumerate(pseq):
            Yn = solve_sequence_vie(g, xhat, W, p)
            ok &= Yn.is_finite()
            diff = Yn.values - Y.values
            at_knots = np.linalg.norm(diff[..., list(p.knot_indices), :], axis=-1)
            out[f"max_sq_{n}"] = (at_knots.max(axis=-1)) ** 2
            out[f"hoel_sq_{n}"] = np.asarray(hoelder_norm(GridPath(pseq.grid, diff), alpha)) ** 2
            full, within, knot = seminorm_decomposition(diff, p, alpha)
            out[f"within_{n}"] = within
            out[f"knot_{n}"] = knot
            out[f"viol_{n}"] = full > (2 * within + knot) * (1 + 1e-12) + 1e-300
        out["ok"] = ok
        return out

    res = map_chunks(chunk, paths, chunk_size, workers)
    ok = res["ok"]
    censored = int((~ok).sum())
    levels = []
    for n, p in enumerate(pseq):
        em = MCEstimate.from_samples(res[f"max_sq_{n}"][ok], censored)
        levels.append(LevelRecord(
            n=n + 1,
            k=p.k,
            mesh=p.mesh,
            E_max_sq=em,
            ratio_to_mesh_2alpha=em.mean / p.mesh ** (2 * alpha),
            hoelder_sq=MCEstimate.from_samples(res[f"hoel_sq_{n}"][ok], censored),
            within_interval=MCEstimate.from_samples(res[f"within_{n}"][ok], censored),
            knot_level=MCEstimate.from_samples(res[f"knot_{n}"][ok], censored),
            decomposition_violations=int(res[f"viol_{n}"][ok].sum()),
        ))
    notes = []
    rate = None
    if L >= 3 and all(lv.E_max_sq.mean > 0 for lv in levels):
        rate = fit_rate([(lv.mesh, lv.E_max_sq) for lv in levels], seed=seed)
    elif L >= 3:
        notes.append("rate not fitted: some level means are zero")
    else:
        notes.append("rate not fitted: fewer than 3 levels")
    return ConvergenceReport(g.label, alpha, paths, seed, censored, levels, rate, notes)


# support diagnostic


@dataclass
class SupportReport:
    alpha: float
    eps: float
    paths: int
    seed: int
    censored: int
    forward: list[dict]
    reverse: Optional[dict]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "eps": self.eps,
            "paths": self.paths,
            "seed": self.seed,
            "censored": self.censored,
            "forward": self.forward,
            "reverse": self.reverse,
        }

    def exceedance(self) -> list[MCEstimate]:
        return [MCEstimate(**{**f["exceedance"], "ci95": tuple(f["exceedance"]["ci95"])})
                for f in self.forward]

    def rows(self) -> list[dict]:
        return [{
            "n": f["n"], "k": f["k"], "mesh": f["mesh"],
            "exceedance": f["exceedance"]["mean"], "exceedance_se": f["exceedance"]["std_error"],
            "distance": f["distance"]["mean"], "distance_se": f["distance"]["std_error"],
        } for f in self.forward]


def run_support_diagnostic(
    c: CoefficientSet,
    xhat: GridPath,
    pseq: PartitionSequence,
    alpha: float,
    eps: float,
    paths: int,
    drivers: Sequence[DriverPath] | None,
    seed: int,
    reverse: bool = True,
    chunk_size: int = 1000,
    workers: int = 1,
) -> SupportReport:
    """(a) forward: fraction of paths with ||x_{nW} - X||_{alpha,r} >= eps per level;
    (b) reverse: per path, min over the driver family of ||X - x_h||_{alpha,r}."""
    _check_alpha(alpha)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if paths < 1:
        raise ValueError("need at least one path")
    drivers = list(drivers or [])
    if reverse and not drivers:
        raise ValueError("reverse diagnostic needs a non-empty driver family")
    grid = pseq.grid
    flow = flow_map(c, xhat, drivers) if reverse else None
    XH = np.stack([x.values for x in flow.paths]) if reverse else None

    def chunk(offset: int, count: int) -> dict:
        W = sample_brownian(grid, c.d, seed, count, offset)
        X = solve_svie(c, xhat, W)
        ok = X.is_finite()
        out = {}
        for n, p in enumerate(pseq):
            xn = solve_support_vie(c, xhat, driver_from_brownian(p, W))
            ok &= xn.is_finite()
            dist = np.asarray(hoelder_norm(xn - X, alpha))
            out[f"dist_{n}"] = dist
        if reverse:
            diff = X.values[:, None, :, :] - XH[None, :, :, :]
            dists = np.asarray(hoelder_norm(GridPath(grid, diff), alpha))
            out["min_dist"] = dists.min(axis=1)
            out["argmin"] = dists.argmin(axis=1)
        out["ok"] = ok
        return out

    res = map_chunks(chunk, paths, chunk_size, workers)
    ok = res["ok"]
    censored = int((~ok).sum())
    forward = []
    for n, p in enumerate(pseq):
        d = res[f"dist_{n}"][ok]
        forward.append({
            "n": n + 1,
            "k": p.k,
            "mesh": p.mesh,
            "exceedance": MCEstimate.from_samples(d >= eps, censored).to_dict(),
            "distance": MCEstimate.from_samples(d, censored).to_dict(),
        })
    rev = None
    if reverse:
        md = res["min_dist"][ok]
        counts = np.bincount(res["argmin"][ok], minlength=len(drivers))
        rev = {
            "n_drivers": len(drivers),
            "min_distance": MCEstimate.from_samples(md, censored).to_dict(),
            "quantiles": {str(q): float(np.quantile(md, q)) for q in (0.0, 0.25, 0.5, 0.75, 1.0)},
            "argmin_counts": [int(v) for v in counts],
            "flow": flow.to_dict(),
        }
    return SupportReport(alpha, eps, paths, seed, censored, forward, rev)


def non_increasing_within_ci(estimates: Sequence[MCEstimate]) -> bool:
    """Each level's mean is at most the previous mean plus the combined 95% half-widths."""
    for a, b in zip(estimates, estimates[1:]):
        slack = (a.ci95[1] - a.mean) + (b.ci95[1] - b.mean)
        if b.mean > a.mean + slack:
            return False
    return True
