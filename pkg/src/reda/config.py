"""Pipeline configuration: defaults per module, optional TOML overrides."""
from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, fields, replace

from .errors import RedaError


@dataclass(frozen=True)
class PipelineConfig:
    mask_prob: float = 0.15
    cutoff: float = 0.5
    kde_bandwidth: float = 32.0
    kde_decay: float = 0.9
    far_threshold: int = 12
    max_iters: int = 10
    melody_weights: tuple = (0.5, 0.3, 0.2)
    match_weights: tuple = (2.0, 1.0, 0.5)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.mask_prob <= 1.0:
            raise RedaError("mask_prob must lie in [0, 1]")
        if not 0.0 < self.cutoff < 1.0:
            raise RedaError("cutoff must lie in (0, 1)")
        if not 0.0 < self.kde_decay < 1.0:
            raise RedaError("kde_decay must lie in (0, 1)")
        if self.kde_bandwidth <= 0:
            raise RedaError("kde_bandwidth must be positive")
        if self.far_threshold < 1:
            raise RedaError("far_threshold must be >= 1")
        if self.max_iters < 1:
            raise RedaError("max_iters must be >= 1")
        if len(self.melody_weights) != 3 or len(self.match_weights) != 3:
            raise RedaError("weight vectors must have three components")


def load_config(path=None, **overrides) -> PipelineConfig:
    """Build a config from an optional TOML file plus keyword overrides.

    Unknown keys in the file are rejected; overrides with value None are
    ignored so CLI flags can pass through unset options.
    """
    known = {f.name for f in fields(PipelineConfig)}
    values: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        unknown = set(doc) - known
        if unknown:
            raise RedaError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in doc.items():
            values[key] = tuple(value) if isinstance(value, list) else value
    cfg = PipelineConfig(**values)
    live = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(live) - known
    if unknown:
        raise RedaError(f"unknown config overrides: {', '.join(sorted(unknown))}")
    return replace(cfg, **live) if live else cfg
