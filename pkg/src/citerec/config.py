"""Pipeline configuration: defaults < JSON config file < command-line flags."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .cf import Scheme
from .citeparse import DEFAULT_REPORTERS
from .fusion import FEATURES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    corpus: str | None = None
    authorities: str | None = None
    artifacts: str = "artifacts"
    reporters: tuple[str, ...] = DEFAULT_REPORTERS
    seed: int = 0
    ratios: tuple[float, float, float] = (0.72, 0.18, 0.10)
    n_folds: int = 6
    min_count: int = 20
    scheme: str = "binary"
    k_neighbors: int = 50
    context_len: int = 50
    bank_cap: int = 100
    max_terms: int = 25_000
    min_df: int = 10
    eval_forecast: int = 1
    window_context: int = 256
    window_forecast: int = 128
    export_epochs: int = 1
    export_split: str = "train"
    features: tuple[str, ...] = FEATURES
    alpha: float = 1.0
    fusion_docs: int = 1000
    fusion_candidates: int = 50
    svm_c: float = 1.0
    svm_epochs: int = 100
    top_n: int = 20
    ks: tuple[int, ...] = (1, 5, 20)
    max_prefixes: int | None = None
    exhaustive_eval: bool = False

    def __post_init__(self):
        positive = (
            "n_folds", "min_count", "k_neighbors", "context_len", "bank_cap", "max_terms",
            "min_df", "eval_forecast", "window_context", "window_forecast", "fusion_candidates",
            "top_n",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("export_epochs", "fusion_docs", "svm_epochs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.max_prefixes is not None and self.max_prefixes < 1:
            raise ConfigError("max_prefixes must be >= 1 when set")
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1) > 1e-9:
            raise ConfigError(f"ratios must be three non-negative numbers summing to 1, got {self.ratios}")
        try:
            Scheme(self.scheme)
        except ValueError:
            raise ConfigError(f"scheme must be one of {[s.value for s in Scheme]}") from None
        bad = set(self.features) - set(FEATURES)
        if bad:
            raise ConfigError(f"unknown features {sorted(bad)}; choose from {list(FEATURES)}")
        if self.alpha < 0 or self.svm_c <= 0:
            raise ConfigError("alpha must be >= 0 and svm_c > 0")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("ks must be positive integers")
        if self.export_split not in ("train", "validation", "test"):
            raise ConfigError("export_split must be train, validation or test")

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides: Any) -> "Config":
        values: dict[str, Any] = {}
        if path is not None:
            try:
                values.update(json.loads(Path(path).read_text(encoding="utf-8")))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("reporters", "ratios", "features", "ks"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values)

    def to_json(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in dataclasses.fields(self)}
