"""Experiment configuration: a TOML file or a plain dict."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .divergence import from_config as divergence_from_config
from .model import from_config as model_from_config

KINDS = (
    "estimate",
    "test-simple",
    "test-composite",
    "power-curve",
    "power-plan",
    "glr-ecdf",
    "dualchi2-ecdf",
    "confreg",
    "mixture-test",
)

_MIXTURE = {"name": "two_mixture",
            "p0": {"family": "normal", "mean": 0.0},
            "p1": {"family": "normal", "mean": 0.5}}

# per-kind defaults; anything given explicitly wins
DEFAULTS = {
    "estimate": dict(model={"name": "exponential"}, divergence={"family": "power", "gamma": 0.0},
                     theta_true=[2.0], sample_sizes=[100]),
    "test-simple": dict(model={"name": "gaussian_mean"}, divergence={"family": "power", "gamma": 2.0},
                        theta_true=[0.0], theta0=[0.0], sample_sizes=[1000]),
    "test-composite": dict(model={"name": "gaussian_mean_vector", "dim": 2},
                           divergence={"family": "power", "gamma": 1.0},
                           theta_true=[0.4, 0.0], constraint={"fixed": {"1": 0.0}},
                           sample_sizes=[1000]),
    "power-curve": dict(model={"name": "exponential"}, divergence={"family": "power", "gamma": 0.0},
                        theta0=[1.0], sample_sizes=[50, 100, 300, 500],
                        grid=[round(0.2 + 0.1 * i, 10) for i in range(29)]),
    "power-plan": dict(model={"name": "exponential"}, divergence={"family": "power", "gamma": 0.0},
                       theta0=[1.0], theta_true=[2.0], target_power=0.9),
    "glr-ecdf": dict(model=_MIXTURE, sample_sizes=[200, 500, 1000]),
    "dualchi2-ecdf": dict(model=_MIXTURE, divergence={"family": "power", "gamma": 2.0},
                          sample_sizes=[200, 500, 1000]),
    "confreg": dict(model=_MIXTURE, divergence={"family": "power", "gamma": 2.0},
                    theta_true=[0.0], sample_sizes=[1000], grid=[round(0.01 * i, 10) for i in range(101)]),
    "mixture-test": dict(model=_MIXTURE, divergence={"family": "power", "gamma": 2.0},
                         theta_true=[0.0], sample_sizes=[1000]),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    model: dict = field(default_factory=dict)
    divergence: dict = field(default_factory=lambda: {"family": "power", "gamma": 0.0})
    theta_true: Optional[list] = None
    theta0: Optional[list] = None
    constraint: Optional[dict] = None
    sample_sizes: list = field(default_factory=lambda: [100])
    replications: int = 1
    level: float = 0.05
    seed: int = 0
    out: str = "out"
    grid: Optional[list] = None
    target_power: Optional[float] = None
    n: Optional[int] = None
    theta_e: str = "principal_value"

    @classmethod
    def from_dict(cls, raw: dict, kind: Optional[str] = None) -> "ExperimentConfig":
        raw = dict(raw)
        kind = kind or raw.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
        raw["kind"] = kind
        merged = {**DEFAULTS[kind], **raw}
        if "replications" not in raw and kind in ("glr-ecdf", "dualchi2-ecdf", "power-curve"):
            merged["replications"] = 1000
        known = {f.name for f in fields(cls)}
        extra = set(merged) - known
        if extra:
            raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, kind: Optional[str] = None) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        if kind is not None and raw.get("kind", kind) != kind:
            raise ConfigError(f"config file is for {raw['kind']!r}, not {kind!r}")
        return cls.from_dict(raw, kind)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- derived objects ------------------------------------------------

    def build_model(self):
        return model_from_config(self.model)

    def build_divergence(self):
        return divergence_from_config(self.divergence)

    def validate(self) -> None:
        if int(self.replications) < 1:
            raise ConfigError("replications must be at least 1")
        if not 0 < float(self.level) < 1:
            raise ConfigError("level must lie in (0, 1)")
        if not self.sample_sizes and self.kind != "power-plan":
            raise ConfigError("sample_sizes must not be empty")
        if any(int(n) < 1 for n in self.sample_sizes):
            raise ConfigError("sample sizes must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.target_power is not None and not 0 < self.target_power < 1:
            raise ConfigError("target_power must lie in (0, 1)")
        try:
            model = self.build_model()
            self.build_divergence()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("theta_true", "theta0"):
            val = getattr(self, name)
            if val is not None and not model.contains(np.asarray(val, dtype=float)):
                raise ConfigError(f"{name} = {val} lies outside the model box")
        if self.grid is not None:
            for g in self.grid:
                if not all(math.isfinite(float(v)) for v in np.atleast_1d(g)):
                    raise ConfigError("grid values must be finite")
