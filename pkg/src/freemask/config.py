"""Run configuration: a JSON document whose keys mirror :class:`RunConfig` fields.

Example::

    {
      "seed": 7,
      "tau_grid": [0.1, 0.2, 0.3],
      "loss_weights": {"lambda_iou": 1.0, "lambda1": 0.5, "lambda2": 0.25, "lambda3": 0.25},
      "optimizer": {"counts": [8, 8, 4, 4], "refine_steps": 64},
      "alpha": 0.7,
      "iterations": 5,
      "generator": {"batch": 30, "corruption": 0.3},
      "paper_literal": false,
      "accumulate": true,
      "harmonize": true
    }

Unknown keys are rejected. Command-line flags override file values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .attention import DEFAULT_TAU_GRID
from .compositor import DEFAULT_TARGET_FRACTION
from .curation import DEFAULT_ALPHA, SyntheticGenerator
from .placement import GridSpec, LossWeights


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    tau_grid: list = field(default_factory=lambda: list(DEFAULT_TAU_GRID))
    loss_weights: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    alpha: float = DEFAULT_ALPHA
    iterations: int = 5
    generator: dict = field(default_factory=dict)
    target_fraction: float = DEFAULT_TARGET_FRACTION
    paper_literal: bool = False
    accumulate: bool = True
    harmonize: bool = True

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        data = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config root must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k, v in (overrides or {}).items():
            if v is None:
                continue
            if isinstance(v, dict) and isinstance(data.get(k), dict):
                data[k] = {**data[k], **v}
            else:
                data[k] = v
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name, p in self.inputs.items():
            if p is not None and not Path(p).exists():
                raise ConfigError(f"input {name!r} does not exist: {p}")
        if not self.tau_grid:
            raise ConfigError("tau_grid must be nonempty")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.target_fraction <= 0:
            raise ConfigError("target_fraction must be positive")
        try:
            self.weights()
            self.grid()
            self.synthetic_generator()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def weights(self) -> LossWeights:
        return LossWeights(**self.loss_weights)

    def grid(self) -> GridSpec:
        opts = {k: tuple(v) for k, v in self.optimizer.items() if k in ("lower", "upper", "counts")}
        return GridSpec(**opts)

    @property
    def refine_steps(self) -> int:
        return int(self.optimizer.get("refine_steps", 64))

    @property
    def spatial_mode(self) -> str:
        return "paper-literal" if self.paper_literal else "corrected"

    def synthetic_generator(self, **extra) -> SyntheticGenerator:
        return SyntheticGenerator(**{**self.generator, **extra})

    def to_dict(self) -> dict:
        return asdict(self)
