"""Run configuration: dataclasses, YAML round trip and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .coeffs import get_coefficients


class ConfigError(ValueError):
    pass


@dataclass
class CoefficientSpec:
    name: str = "bounded_separable"
    params: dict = field(default_factory=dict)


@dataclass
class GridSpec:
    r: float = 0.0
    T: float = 1.0
    base_intervals: int = 8
    levels: int = 3
    oversampling: int = 4


@dataclass
class SetupSpec:
    kind: str = "support"  # support | girsanov | custom
    weights: dict = field(default_factory=dict)  # custom: role -> {term: weight}


@dataclass
class DriverSpec:
    kind: str = "lattice"  # linear | lattice | file | none
    slope: list = field(default_factory=lambda: [1.0])
    coarse_knots: int = 2
    slope_levels: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    path: Optional[str] = None
    cap: int = 4096


@dataclass
class RunConfig:
    coefficients: CoefficientSpec = field(default_factory=CoefficientSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    setup: SetupSpec = field(default_factory=SetupSpec)
    drivers: DriverSpec = field(default_factory=DriverSpec)
    xhat: list = field(default_factory=lambda: [1.0])
    alpha: float = 0.0
    p: float = 2.0
    eps: float = 0.25
    paths: int = 1000
    seed: int = 0
    workers: int = 1
    chunk_size: int = 1000
    reverse: bool = True
    out: str = "out"
    format: str = "json"
    dump_paths: bool = False
    blowup_threshold: float = 1e12
    max_censored_fraction: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        data = dict(data or {})
        nested = {"coefficients": CoefficientSpec, "grid": GridSpec, "setup": SetupSpec, "drivers": DriverSpec}
        kwargs: dict[str, Any] = {}
        names = {f.name: f for f in dataclasses.fields(cls)}
        for key, val in data.items():
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
            if key in nested:
                kwargs[key] = _build(nested[key], val, key)
            else:
                kwargs[key] = val
        cfg = cls(**kwargs)
        cfg._coerce()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_yaml(text)

    def _coerce(self):
        try:
            self.xhat = [float(v) for v in (self.xhat if isinstance(self.xhat, list) else [self.xhat])]
            self.drivers.slope = [float(v) for v in (
                self.drivers.slope if isinstance(self.drivers.slope, list) else [self.drivers.slope])]
            self.drivers.slope_levels = [float(v) for v in self.drivers.slope_levels]
            for name in ("alpha", "p", "eps", "blowup_threshold", "max_censored_fraction"):
                setattr(self, name, float(getattr(self, name)))
            for name in ("paths", "seed", "workers", "chunk_size"):
                setattr(self, name, int(getattr(self, name)))
            g = self.grid
            g.r, g.T = float(g.r), float(g.T)
            g.base_intervals, g.levels, g.oversampling = int(g.base_intervals), int(g.levels), int(g.oversampling)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value in config: {exc}") from None

    def validate(self, command: str) -> None:
        """Check preconditions of the command before any compute."""
        try:
            c = get_coefficients(self.coefficients.name, **self.coefficients.params)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc).strip('"')) from None
        g = self.grid
        if not (0 <= g.r < g.T):
            raise ConfigError("need 0 <= r < T")
        if min(g.base_intervals, g.levels, g.oversampling) < 1:
            raise ConfigError("base_intervals, levels and oversampling must be >= 1")
        if len(self.xhat) != c.m:
            raise ConfigError(f"xhat has {len(self.xhat)} components, coefficients need {c.m}")
        if self.setup.kind not in ("support", "girsanov", "custom"):
            raise ConfigError(f"unknown setup kind {self.setup.kind!r}")
        if self.drivers.kind not in ("linear", "lattice", "file", "none"):
            raise ConfigError(f"unknown driver kind {self.drivers.kind!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.workers < 1 or self.chunk_size < 1:
            raise ConfigError("workers and chunk_size must be >= 1")
        if not 0 <= self.max_censored_fraction <= 1:
            raise ConfigError("max_censored_fraction must lie in [0, 1]")
        if command in ("converge", "support"):
            if not 0 <= self.alpha < 0.5:
                raise ConfigError(f"alpha must lie in [0, 1/2), got {self.alpha}")
        if command == "converge":
            if self.paths < 100:
                raise ConfigError("converge needs at least 100 paths")
        if command in ("simulate", "support") and self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if command == "support" and self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.setup.kind == "girsanov" or command == "flow" or (command == "support" and self.reverse):
            if self.drivers.kind == "none":
                raise ConfigError(f"{command} needs drivers")
            if self.drivers.kind == "linear" and len(self.drivers.slope) != c.d:
                raise ConfigError(f"driver slope needs {c.d} components")
            if self.drivers.kind == "lattice" and not self.drivers.slope_levels:
                raise ConfigError("driver lattice is empty")
            if self.drivers.kind == "lattice" and len(self.drivers.slope_levels) ** (
                self.drivers.coarse_knots * c.d
            ) > self.drivers.cap:
                raise ConfigError("driver lattice exceeds the cap")
            if self.drivers.kind == "file" and not self.drivers.path:
                raise ConfigError("driver file path missing")
        if self.setup.kind == "girsanov" and self.drivers.kind != "linear" and self.drivers.kind != "file":
            raise ConfigError("girsanov setup needs a single driver (linear or file)")


def _build(cls, val, key):
    if val is None:
        return cls()
    if not isinstance(val, dict):
        raise ConfigError(f"{key} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    extra = set(val) - known
    if extra:
        raise ConfigError(f"unknown keys in {key}: {sorted(extra)}")
    return cls(**val)
