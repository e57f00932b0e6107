"""Training configuration and the flat ``key = value`` config file format."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .encoders import NscMeasure

ABLATIONS = ("no_smm", "no_sca", "no_uce", "no_fme", "no_kl")


@dataclass(frozen=True)
class TrainingConfig:
    # propagation / fusion
    alpha: float = 0.33
    T: int = 2
    gamma: float = 0.3
    beta: float = 1.0
    lam: float = 0.01
    fme_iterations: int = 1
    measure: NscMeasure = NscMeasure.RAI
    # losses
    theta: float = 1.0
    zeta: float = 1e-4
    # optimization
    dim: int = 64
    learning_rate: float = 0.01
    batch_size: int = 2048
    max_epochs: int = 1000
    patience: int = 50
    seed: int = 0
    recompute: str = "per-step"
    stop_norm_grad: bool = False
    # evaluation split
    train_frac: float = 0.8
    valid_frac: float = 0.125
    # ablations
    no_smm: bool = False
    no_sca: bool = False
    no_uce: bool = False
    no_fme: bool = False
    no_kl: bool = False

    def __post_init__(self):
        object.__setattr__(self, "measure", NscMeasure.parse(self.measure))
        if not 0.0 <= self.alpha < 1.0 / 3.0:
            raise ValueError(f"alpha must satisfy 0 <= alpha < 1/3, got {self.alpha}")
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        for name in ("theta", "zeta", "learning_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("T", "fme_iterations", "max_epochs", "patience"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.dim < 1 or self.batch_size < 1:
            raise ValueError("dim and batch_size must be positive")
        if self.recompute not in ("per-step", "per-epoch"):
            raise ValueError(f"recompute must be 'per-step' or 'per-epoch', got {self.recompute!r}")
        if not 0.0 < self.train_frac <= 1.0 or not 0.0 <= self.valid_frac < 1.0:
            raise ValueError("train_frac must lie in (0, 1] and valid_frac in [0, 1)")

    # effective weights once ablations are applied
    @property
    def gamma_eff(self) -> float:
        if self.no_smm:
            return 0.0
        if self.no_sca:
            return 1.0
        return self.gamma

    @property
    def beta_eff(self) -> float:
        return 1.0 if self.no_uce else self.beta

    @property
    def theta_eff(self) -> float:
        return 0.0 if self.no_kl else self.theta

    def replace(self, **changes) -> "TrainingConfig":
        return dataclasses.replace(self, **changes)

    def to_items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, NscMeasure):
                v = v.value
            out.append((f.name, str(v)))
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items())


# accepted spellings in config files and on the command line
_ALIASES = {"lambda": "lam"}


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in fields(TrainingConfig)}[name]
    raw = raw.strip()
    if ftype == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def parse_overrides(items: dict) -> dict:
    """Turn ``{key: text}`` into typed :class:`TrainingConfig` keyword arguments."""
    known = {f.name for f in fields(TrainingConfig)}
    out = {}
    for key, raw in items.items():
        name = _ALIASES.get(key, key).replace("-", "_")
        if name not in known:
            raise ValueError(f"unknown configuration key {key!r}")
        out[name] = _coerce(name, raw) if isinstance(raw, str) else raw
    return out


def read_config_file(path) -> dict:
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[config]\n" + text)
    return parse_overrides(dict(parser["config"]))


def loads_config(text: str) -> TrainingConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[config]\n" + text)
    return TrainingConfig(**parse_overrides(dict(parser["config"])))
