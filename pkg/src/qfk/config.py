"""Flat JSON run configuration; every key doubles as a CLI flag."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .rng import MAX_SEED


@dataclass
class RunConfig:
    train_csv: str | None = None
    test_csv: str | None = None
    artifacts_dir: str = "artifacts"
    time_column: str = "time"
    label_column: str = "attack"
    delimiter: str = ","
    drop_columns: list[str] = field(default_factory=list)

    window: int = 60
    features: int = 16
    tree_depth: int = 8
    rank_max_rows: int = 5000

    train_fraction: float = 0.5
    train_normal_only: bool = True
    train_rows: int = 1000
    eval_normal: int = 1000
    eval_anomaly: int = 500

    kernel: str = "quantum"
    qubits: int = 8
    reps: int = 3
    shots: int = 0
    engine: str = "statevector"
    n_jobs: int = 1
    gamma: float | None = None
    nu: float = 0.04
    seed: int = 0

    synth_normal: int = 1700
    synth_anomaly: int = 300
    synth_features: int = 16
    synth_shift: float = 2.0

    def validate(self) -> RunConfig:
        positive = ("window", "features", "tree_depth", "rank_max_rows", "train_rows", "qubits", "reps", "n_jobs", "synth_features")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("eval_normal", "eval_anomaly", "shots", "synth_normal", "synth_anomaly"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.kernel not in ("quantum", "rbf"):
            raise ConfigError(f"kernel must be 'quantum' or 'rbf', got {self.kernel!r}")
        if self.kernel == "quantum" and self.features != 2 * self.qubits:
            raise ConfigError(f"quantum kernel needs features = 2 * qubits ({self.features} != 2 * {self.qubits})")
        if self.engine not in ("statevector", "circuit"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if not 0.0 < self.nu <= 1.0:
            raise ConfigError(f"nu must lie in (0, 1], got {self.nu}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.synth_shift < 0:
            raise ConfigError("synth_shift must be nonnegative")
        return self

    @property
    def artifacts(self) -> Path:
        return Path(self.artifacts_dir)

    @property
    def rbf_gamma(self) -> float:
        return self.gamma if self.gamma is not None else 1.0 / self.features

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, doc: dict) -> RunConfig:
        unknown = set(doc) - set(cls.keys())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> RunConfig:
        doc = {}
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"no such config file: {path}")
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError(f"{path}: config must be a JSON object")
        doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(doc).validate()

    def to_json(self) -> dict:
        return dataclasses.asdict(self)
