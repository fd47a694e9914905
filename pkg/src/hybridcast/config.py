"""Experiment configuration: a flat INI-style key-value file with section
headers.  Every training/architecture knob has a config key of the same
meaning with the published experimental default as its default value.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field

__all__ = ["ExperimentConfig", "ConfigError", "ALL_MODELS", "stable_seed"]

ALL_MODELS = (
    "LR", "BPNN", "LSTM", "GRU", "DeepTCN",
    "CEEMDAN-LR", "CEEMDAN-BPNN", "CEEMDAN-LSTM", "CEEMDAN-GRU", "CEEMDAN-DeepTCN",
)


class ConfigError(ValueError):
    pass


def stable_seed(*parts) -> int:
    """Deterministic 63-bit seed from arbitrary labeled parts (stable
    across processes and platforms, unlike the builtin hash)."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class ExperimentConfig:
    # data
    source: str = "synthetic"  # "synthetic" or a file path
    n_hours: int = 2000
    data_seed: int = 42
    # decomposition
    decomposition_enabled: bool = True
    noise_ratio: float = 0.2
    trials: int = 100
    decomposition_seed: int = 0
    attach_mode: str = "full_series"
    # experiment grid
    models: tuple = ("LR", "DeepTCN", "CEEMDAN-DeepTCN")
    horizons: tuple = (1, 2, 3)
    robustness_runs: int = 1
    base_seed: int = 0
    history_length: int = 24
    train_fraction: float = 0.6
    validation_fraction: float = 0.2
    test_fraction: float = 0.2
    # training
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.01
    # architecture
    bpnn_hidden: int = 32
    lstm_hidden: int = 64
    gru_hidden: int = 64
    tcn_blocks: int = 4
    tcn_dilations: tuple = (1, 2, 4, 8)
    tcn_channels: tuple = (32, 32, 16, 16)
    tcn_kernel_size: int = 2
    embedding_month: int = 2
    embedding_day: int = 2
    embedding_hour: int = 4
    embedding_weather: int = 2
    # output
    out_dir: str = "runs/out"
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.models:
            raise ConfigError("at least one model is required")
        for name in self.models:
            if name not in ALL_MODELS:
                raise ConfigError(f"unknown model {name!r}; choose from {ALL_MODELS}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError("at least one horizon >= 1 is required")
        if not self.decomposition_enabled and any(m.startswith("CEEMDAN-") for m in self.models):
            raise ConfigError(
                "CEEMDAN-* models require [decomposition] enabled = true"
            )
        if self.source != "synthetic" and not os.path.exists(self.source):
            raise ConfigError(f"data file {self.source!r} does not exist")
        if self.robustness_runs < 1:
            raise ConfigError("robustness_runs must be >= 1")
        if abs(self.train_fraction + self.validation_fraction + self.test_fraction - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")
        if len(self.tcn_dilations) != self.tcn_blocks or len(self.tcn_channels) != self.tcn_blocks:
            raise ConfigError("tcn_dilations and tcn_channels must have tcn_blocks entries")

    @property
    def fractions(self):
        return (self.train_fraction, self.validation_fraction, self.test_fraction)

    @property
    def embedding_sizes(self) -> dict:
        return {
            "weather": self.embedding_weather,
            "month": self.embedding_month,
            "day_of_week": self.embedding_day,
            "hour": self.embedding_hour,
        }

    def needs_decomposition(self) -> bool:
        return self.decomposition_enabled and any(m.startswith("CEEMDAN-") for m in self.models)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
        kwargs = {}

        def take(section, key, cast, dest=None):
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    kwargs[dest or key] = cast(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc

        def boolean(raw: str) -> bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")

        def int_tuple(raw: str) -> tuple:
            return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)

        def str_tuple(raw: str) -> tuple:
            return tuple(v.strip() for v in raw.split(",") if v.strip())

        take("data", "source", str)
        take("data", "n_hours", int)
        take("data", "seed", int, "data_seed")
        take("decomposition", "enabled", boolean, "decomposition_enabled")
        take("decomposition", "noise_ratio", float)
        take("decomposition", "trials", int)
        take("decomposition", "seed", int, "decomposition_seed")
        take("decomposition", "mode", str, "attach_mode")
        take("models", "set", str_tuple, "models")
        take("experiment", "horizons", int_tuple)
        take("experiment", "robustness_runs", int)
        take("experiment", "base_seed", int)
        take("experiment", "history_length", int)
        take("experiment", "train_fraction", float)
        take("experiment", "validation_fraction", float)
        take("experiment", "test_fraction", float)
        take("training", "epochs", int)
        take("training", "batch_size", int)
        take("training", "learning_rate", float)
        take("architecture", "bpnn_hidden", int)
        take("architecture", "lstm_hidden", int)
        take("architecture", "gru_hidden", int)
        take("architecture", "tcn_blocks", int)
        take("architecture", "tcn_dilations", int_tuple)
        take("architecture", "tcn_channels", int_tuple)
        take("architecture", "tcn_kernel_size", int)
        take("architecture", "embedding_month", int)
        take("architecture", "embedding_day", int)
        take("architecture", "embedding_hour", int)
        take("architecture", "embedding_weather", int)
        take("output", "dir", str, "out_dir")
        take("output", "jobs", int)
        return cls(**kwargs)

    def describe(self) -> dict:
        """Config echo for reports (stable key order)."""
        return {
            "data": {"source": self.source, "n_hours": self.n_hours, "seed": self.data_seed},
            "decomposition": {
                "enabled": self.decomposition_enabled,
                "noise_ratio": self.noise_ratio,
                "trials": self.trials,
                "seed": self.decomposition_seed,
                "mode": self.attach_mode,
            },
            "models": list(self.models),
            "experiment": {
                "horizons": list(self.horizons),
                "robustness_runs": self.robustness_runs,
                "base_seed": self.base_seed,
                "history_length": self.history_length,
                "fractions": list(self.fractions),
            },
            "training": {
                "epochs": self.epochs,
                "batch_size": self.batch_size,
                "learning_rate": self.learning_rate,
            },
            "architecture": {
                "bpnn_hidden": self.bpnn_hidden,
                "lstm_hidden": self.lstm_hidden,
                "gru_hidden": self.gru_hidden,
                "tcn_blocks": self.tcn_blocks,
                "tcn_dilations": list(self.tcn_dilations),
                "tcn_channels": list(self.tcn_channels),
                "tcn_kernel_size": self.tcn_kernel_size,
                "embedding_sizes": self.embedding_sizes,
            },
        }
