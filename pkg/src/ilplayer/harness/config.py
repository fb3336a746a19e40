"""Experiment configuration and config-file parsing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..comboptnet import BackwardConfig, BasisMode
from ..constraints import Parametrization
from ..nn import LossKind

TASKS = ("rc", "wsc", "knapsack")
METHODS = ("comboptnet", "mlp", "box", "lp_max")


@dataclass(frozen=True)
class ExperimentConfig:
    """Training hyperparameters; defaults are the published ones for all three tasks."""

    task: str = "rc"
    method: str = "comboptnet"
    multiplier: int = 1  # learnable constraints = multiplier * ground-truth count
    batch_size: int = 8
    epochs: int = 100
    lr: float = 5e-4
    temperature: float | None = 0.5  # None: hard minimum
    basis: str = "delta"
    parametrization: str = "learnable_origins"
    loss: str = "mse"
    seed: int = 0
    eval_every: int = 1
    hidden: int = 512  # knapsack extractor width

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if isinstance(self.temperature, str):
            if self.temperature.lower() != "hard":
                raise ValueError(f"temperature must be a number or 'hard', got {self.temperature!r}")
            object.__setattr__(self, "temperature", None)
        BasisMode(self.basis)
        Parametrization(self.parametrization)
        LossKind(self.loss)
        for name in ("multiplier", "batch_size", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0 or not self.lr > 0:
            raise ValueError("epochs must be >= 0 and lr > 0")

    @property
    def backward_config(self) -> BackwardConfig:
        return BackwardConfig(self.temperature, self.basis)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def config_hash(self) -> str:
        """Digest of everything except the seed, so restarts share a hash."""
        data = {k: v for k, v in self.to_dict().items() if k != "seed"}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str) -> dict:
    """JSON object, or ``key = value`` lines with ``#`` comments."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(parse_config_text(Path(path).read_text()))
