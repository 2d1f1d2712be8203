"""Coefficient sets (b, sigma), the correction term rho and the general remainder R.

The contraction shared by rho and R runs in a fixed loop order with plain
multiply-adds, so two algebraically equal setups that differ only by exact
power-of-two scalings give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from .funcalc import Functional, zero
from .paths import DriverPath, GridPath, stop_path


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Drift b (values in R^m) and diffusion sigma (values in R^{m x d})."""

    b: Functional
    sigma: Functional
    name: str = "custom"
    separable: Optional["KernelSeparableCoefficients"] = None
    note: str = ""

    def __post_init__(self):
        m, d = self.sigma.shape
        if self.b.shape != (m,):
            raise ValueError(f"drift shape {self.b.shape} does not match sigma shape {(m, d)}")

    @property
    def m(self) -> int:
        return self.sigma.shape[0]

    @property
    def d(self) -> int:
        return self.sigma.shape[1]

    @property
    def dt_b(self):
        return self.b.dt

    @property
    def dt_sigma(self):
        return self.sigma.dt

    @property
    def dx_sigma(self):
        return self.sigma.dx

    @property
    def rho(self) -> Functional:
        return rho_functional(self.sigma)


def _contract(D: np.ndarray, S: np.ndarray) -> np.ndarray:
    """sum_l sum_j D[..., k, l, j] * S[..., j, l] with D: (..., n, m, d, m), S: (..., m, d)."""
    m, d = D.shape[-3], D.shape[-2]
    out = None
    for l in range(d):
        for j in range(m):
            term = D[..., l, j] * S[..., j, l][..., None, None]
            out = term if out is None else out + term
    return out


def _diagonal_value(F: Functional, s: float, x: GridPath) -> np.ndarray:
    return F.evaluate(np.array([s]), s, x)[..., 0, :, :]


def rho_functional(sigma: Functional) -> Functional:
    """rho_k(t,s,x) = sum_l d_x sigma_{k,l}(t,s,x) sigma(s,s,x) e_l for s < t, else 0."""
    m, _ = sigma.shape

    def fn(t, s, x):
        D = sigma.evaluate_dx(t, s, x)
        S = _diagonal_value(sigma, s, x)
        return np.where((t > s)[:, None], _contract(D, S), 0.0)

    return Functional(fn, (m,), name=f"rho[{sigma.name}]")


def remainder_functional(B_bar: Functional, Sigma: Functional) -> Functional:
    """R_k(t,s,x) = sum_l d_x B_bar_{k,l}(t,s,x) ((1/2) B_bar + Sigma)(s,s,x) e_l for s < t."""
    m, _ = B_bar.shape
    if B_bar.is_zero:
        return zero((m,))
    half_plus = 0.5 * B_bar + Sigma

    def fn(t, s, x):
        D = B_bar.evaluate_dx(t, s, x)
        S = _diagonal_value(half_plus, s, x)
        return np.where((t > s)[:, None], _contract(D, S), 0.0)

    return Functional(fn, (m,), name=f"R[{B_bar.name}, {Sigma.name}]")


def correction_rho(c: CoefficientSet, t: float, s: float, x: GridPath) -> np.ndarray:
    return c.rho(t, s, x)


@dataclass(frozen=True, eq=False)
class GeneralCoefficients:
    """The four coefficient maps of the general setting plus the driver h."""

    B_under: Functional
    B_H: Functional
    B_bar: Functional
    Sigma: Functional
    h: Optional[DriverPath] = None
    label: str = "custom"
    R: Functional = field(init=False)

    def __post_init__(self):
        m, d = self.B_bar.shape
        for F in (self.B_H, self.Sigma):
            if F.shape != (m, d):
                raise ValueError(f"{F.name} has shape {F.shape}, expected {(m, d)}")
        if self.B_under.shape != (m,):
            raise ValueError(f"B_under has shape {self.B_under.shape}, expected {(m,)}")
        if self.h is not None and self.h.dim != d:
            raise ValueError("driver dimension does not match d")
        object.__setattr__(self, "R", remainder_functional(self.B_bar, self.Sigma))

    @property
    def m(self) -> int:
        return self.B_bar.shape[0]

    @property
    def d(self) -> int:
        return self.B_bar.shape[1]


def remainder_R(g: GeneralCoefficients, t: float, s: float, x: GridPath) -> np.ndarray:
    return g.R(t, s, x)


def support_setup(c: CoefficientSet) -> GeneralCoefficients:
    """B_under = b - rho/2, B_H = 0, B_bar = sigma, Sigma = 0: the forward support limit."""
    m, d = c.sigma.shape
    return GeneralCoefficients(
        c.b + (-0.5) * c.rho, zero((m, d)), c.sigma, zero((m, d)), None, "support"
    )


def girsanov_setup(c: CoefficientSet, h: DriverPath) -> GeneralCoefficients:
    """B_under = b, B_H = sigma, B_bar = -sigma, Sigma = sigma: the reweighted limit toward x_h."""
    return GeneralCoefficients(c.b, c.sigma, -c.sigma, c.sigma, h, "girsanov")


_ROLES = ("B_under", "B_H", "B_bar", "Sigma")


def custom_setup(
    c: CoefficientSet, weights: Mapping[str, Mapping[str, float]], h: Optional[DriverPath] = None
) -> GeneralCoefficients:
    """Linear combinations: B_under of {b, rho}; B_H, B_bar, Sigma of {sigma}.

    Example: ``{"B_under": {"b": 1, "rho": -0.5}, "B_bar": {"sigma": 1}}``.
    Roles left out are zero.
    """
    m, d = c.sigma.shape
    unknown = set(weights) - set(_ROLES)
    if unknown:
        raise ValueError(f"unknown roles {sorted(unknown)}")
    basis = {"B_under": {"b": c.b, "rho": c.rho}}
    out = {}
    for role in _ROLES:
        allowed = basis.get(role, {"sigma": c.sigma})
        acc = zero((m,) if role == "B_under" else (m, d))
        for key, w in (weights.get(role) or {}).items():
            if key not in allowed:
                raise ValueError(f"{role} may combine {sorted(allowed)}, got {key!r}")
            acc = acc + float(w) * allowed[key]
        out[role] = acc
    return GeneralCoefficients(out["B_under"], out["B_H"], out["B_bar"], out["Sigma"], h, "custom")


# kernel-separable family b = K_b(t,s) bbar(s,x), sigma = K_sigma(t,s) sigmabar(s,x)

Kernel = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class KernelSeparableCoefficients:
    """Kernels act on (t array, s scalar); bbar, sigmabar on (s, stopped path).

    ``dx_sigmabar`` returns shape batch + (m, d, m). Kernel time derivatives
    are in the first argument.
    """

    K_b: Kernel
    K_sigma: Kernel
    dK_b: Kernel
    dK_sigma: Kernel
    bbar: Callable
    sigmabar: Callable
    m: int
    d: int
    dx_sigmabar: Optional[Callable] = None
    dx_bbar: Optional[Callable] = None

    def to_coefficient_set(self, name: str = "separable", note: str = "") -> CoefficientSet:
        Kb, Ks, dKb, dKs = self.K_b, self.K_sigma, self.dK_b, self.dK_sigma
        bbar, sbar, dsbar, dbbar = self.bbar, self.sigmabar, self.dx_sigmabar, self.dx_bbar

        def b(t, s, x):
            return Kb(t, s)[:, None] * np.asarray(bbar(s, x))[..., None, :]

        def b_dt(t, s, x):
            return dKb(t, s)[:, None] * np.asarray(bbar(s, x))[..., None, :]

        def b_dx(t, s, x):
            return Kb(t, s)[:, None, None] * np.asarray(dbbar(s, x))[..., None, :, :]

        def sig(t, s, x):
            return Ks(t, s)[:, None, None] * np.asarray(sbar(s, x))[..., None, :, :]

        def sig_dt(t, s, x):
            return dKs(t, s)[:, None, None] * np.asarray(sbar(s, x))[..., None, :, :]

        def sig_dx(t, s, x):
            return Ks(t, s)[:, None, None, None] * np.asarray(dsbar(s, x))[..., None, :, :, :]

        bf = Functional(b, (self.m,), b_dx if dbbar else None, b_dt, f"{name}.b")
        sf = Functional(sig, (self.m, self.d), sig_dx if dsbar else None, sig_dt, f"{name}.sigma")
        bf.split = (Kb, bbar)
        sf.split = (Ks, sbar)
        return CoefficientSet(bf, sf, name, self, note)


def _exp_kernel(lam: float):
    def K(t, s):
        return np.exp(-lam * (np.asarray(t) - s))

    def dK(t, s):
        return -lam * np.exp(-lam * (np.asarray(t) - s))

    return K, dK


def _unit_kernel():
    return (lambda t, s: np.ones_like(np.asarray(t, dtype=float)),
            lambda t, s: np.zeros_like(np.asarray(t, dtype=float)))


def _gbm() -> CoefficientSet:
    K, dK = _unit_kernel()
    ks = KernelSeparableCoefficients(
        K, K, dK, dK,
        bbar=lambda s, x: np.zeros(x.batch_shape + (1,)),
        sigmabar=lambda s, x: x.at(s)[..., None],
        m=1, d=1,
        dx_sigmabar=lambda s, x: np.ones(x.batch_shape + (1, 1, 1)),
        dx_bbar=lambda s, x: np.zeros(x.batch_shape + (1, 1)),
    )
    return ks.to_coefficient_set(
        "gbm", "sigma(t,s,x) = x(s) is unbounded; kept because closed forms exist"
    )


def _additive_kernel(lam: float = 1.0) -> CoefficientSet:
    K, dK = _exp_kernel(lam)
    ks = KernelSeparableCoefficients(
        K, K, dK, dK,
        bbar=lambda s, x: np.zeros(x.batch_shape + (1,)),
        sigmabar=lambda s, x: np.ones(x.batch_shape + (1, 1)),
        m=1, d=1,
        dx_sigmabar=lambda s, x: np.zeros(x.batch_shape + (1, 1, 1)),
        dx_bbar=lambda s, x: np.zeros(x.batch_shape + (1, 1)),
    )
    return ks.to_coefficient_set("additive_kernel")


def _bounded_separable(lam: float = 1.0, drift_scale: float = 1.0, sigma_scale: float = 1.0):
    K, dK = _exp_kernel(lam)

    def bbar(s, x):
        v = x.at(s)
        return -drift_scale * v / (1.0 + v**2)

    def dx_bbar(s, x):
        v = x.at(s)
        return (-drift_scale * (1.0 - v**2) / (1.0 + v**2) ** 2)[..., None]

    ks = KernelSeparableCoefficients(
        K, K, dK, dK,
        bbar=bbar,
        sigmabar=lambda s, x: sigma_scale * np.sin(x.at(s))[..., None],
        m=1, d=1,
        dx_sigmabar=lambda s, x: sigma_scale * np.cos(x.at(s))[..., None, None],
        dx_bbar=dx_bbar,
    )
    return ks.to_coefficient_set("bounded_separable")


_BUILTINS = {
    "gbm": _gbm,
    "additive_kernel": _additive_kernel,
    "bounded_separable": _bounded_separable,
}


def builtin_examples() -> Mapping[str, CoefficientSet]:
    """Read-only catalog of the builtin coefficient sets at default parameters."""
    return MappingProxyType({name: make() for name, make in _BUILTINS.items()})


def get_coefficients(name: str, **params) -> CoefficientSet:
    try:
        make = _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown coefficient set {name!r}; choose from {sorted(_BUILTINS)}") from None
    try:
        return make(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name!r}: {exc}") from None
