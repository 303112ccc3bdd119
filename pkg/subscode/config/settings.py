import os
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional

import numpy as np
from dotenv import dotenv_values, load_dotenv

from subscode.errors import ConfigError
from subscode.models.pipeline_types import TrainConfig

# Load environment variables
load_dotenv()


class Settings:
    # App Configuration
    APP_NAME = "subscode"
    VERSION = "0.1.0"
    DEBUG = os.getenv("SUBSCODE_DEBUG", "false").lower() == "true"
    LOG_LEVEL = os.getenv("SUBSCODE_LOG_LEVEL", "INFO")

    # Run ledger; empty string disables it
    DATABASE_URL = os.getenv("SUBSCODE_DATABASE_URL", f"sqlite:///{os.path.join(os.getcwd(), 'subscode_runs.db')}")

    # Pipeline defaults not covered by the config file
    THREADS = int(os.getenv("SUBSCODE_THREADS", "1"))
    OUTPUT_DIR = os.getenv("SUBSCODE_OUTPUT_DIR", "runs")


# Create settings instance
settings = Settings()


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_optional(parser):
    def parse(text: str):
        if text.strip().lower() in ("", "none"):
            return None
        return parser(text)

    return parse


# dotted key -> (PipelineConfig attribute, parser)
CONFIG_KEYS = {
    "corpus.lm": ("lm_corpus", _parse_optional(str)),
    "corpus.embed": ("embed_corpus", _parse_optional(str)),
    "output.dir": ("output_dir", str),
    "seed": ("seed", int),
    "threads": ("threads", int),
    "clean.lowercase_ratio": ("lowercase_ratio", _parse_optional(float)),
    "vocab.min_count": ("min_count", int),
    "lm.order": ("lm_order", int),
    "lm.smoothing": ("lm_smoothing", str),
    "subs.K": ("subs_k", int),
    "subs.pruned": ("subs_pruned", _parse_bool),
    "sample.S": ("sample_s", int),
    "scode.d": ("scode_d", int),
    "scode.z_constant": ("z_constant", float),
    "scode.lambda0": ("lambda0", float),
    "scode.nu": ("nu", float),
    "scode.epochs": ("epochs", int),
    "scode.seed": ("scode_seed", _parse_optional(int)),
    "scode.parallel": ("scode_parallel", _parse_bool),
    "export.sigma": ("export_sigma", float),
    "export.side": ("export_side", str),
}

SMOOTHING_METHODS = ("kn", "additive")
EXPORT_SIDES = ("phi", "psi", "concat")


def derive_seed(seed: int, label: str) -> int:
    """Split the top-level seed into an independent stage seed keyed by a fixed label."""
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(label.encode("utf-8"))])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


@dataclass
class PipelineConfig:
    """End-to-end pipeline configuration; defaults are the usual induction settings (4-gram, K=S=100)."""

    lm_corpus: Optional[str] = None
    embed_corpus: Optional[str] = None
    output_dir: str = settings.OUTPUT_DIR
    seed: int = 1
    threads: int = settings.THREADS
    lowercase_ratio: Optional[float] = None
    min_count: int = 2
    lm_order: int = 4
    lm_smoothing: str = "kn"
    subs_k: int = 100
    subs_pruned: bool = True
    sample_s: int = 100
    scode_d: int = 50
    z_constant: float = 0.166
    lambda0: float = 0.5
    nu: float = 50.0
    epochs: int = 20
    scode_seed: Optional[int] = None
    scode_parallel: bool = False
    export_sigma: float = 0.1
    export_side: str = "phi"

    @classmethod
    def from_mapping(cls, values: Mapping[str, Optional[str]]) -> "PipelineConfig":
        config = cls()
        config.update(values)
        return config

    def update(self, values: Mapping[str, Optional[str]]):
        """apply dotted key=value strings on top of the current values"""
        for key, raw in values.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(key, "unknown configuration key")
            attr, parser = CONFIG_KEYS[key]
            try:
                setattr(self, attr, parser("" if raw is None else raw))
            except ValueError as e:
                raise ConfigError(key, str(e)) from e

    def validate(self) -> "PipelineConfig":
        """Raise ConfigError naming the first out-of-range key."""
        checks = [
            ("lm.order", self.lm_order >= 1, "must be >= 1"),
            ("vocab.min_count", self.min_count >= 1, "must be >= 1"),
            ("subs.K", self.subs_k >= 1, "must be >= 1"),
            ("sample.S", self.sample_s >= 1, "must be >= 1"),
            ("threads", self.threads >= 1, "must be >= 1"),
            ("export.sigma", self.export_sigma > 0, "must be > 0"),
            ("lm.smoothing", self.lm_smoothing in SMOOTHING_METHODS, f"must be one of {', '.join(SMOOTHING_METHODS)}"),
            ("export.side", self.export_side in EXPORT_SIDES, f"must be one of {', '.join(EXPORT_SIDES)}"),
        ]
        if self.lowercase_ratio is not None:
            checks.append(("clean.lowercase_ratio", 0.0 <= self.lowercase_ratio <= 1.0, "must be within [0, 1]"))
        for key, ok, message in checks:
            if not ok:
                raise ConfigError(key, f"{message}, got {getattr(self, CONFIG_KEYS[key][0])!r}")
        # scode.* ranges live with TrainConfig
        self.train_config()
        return self

    def to_mapping(self) -> Dict[str, str]:
        values = {}
        for key, (attr, _) in CONFIG_KEYS.items():
            value = getattr(self, attr)
            if isinstance(value, bool):
                values[key] = "true" if value else "false"
            elif value is None:
                values[key] = ""
            else:
                values[key] = str(value)
        return values

    def canonical(self) -> str:
        """sorted key=value rendering used for hashing"""
        mapping = self.to_mapping()
        return "\n".join(f"{key}={mapping[key]}" for key in sorted(mapping)) + "\n"

    def stage_seed(self, label: str) -> int:
        return derive_seed(self.seed, label)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            d=self.scode_d,
            z_constant=self.z_constant,
            lambda0=self.lambda0,
            nu=self.nu,
            epochs=self.epochs,
            seed=self.scode_seed if self.scode_seed is not None else self.stage_seed("scode"),
            parallel=self.scode_parallel,
        )

    def artifact(self, name: str) -> Path:
        return Path(self.output_dir) / name


def load_pipeline_config(path: Optional[str] = None, overrides: Optional[Mapping[str, str]] = None) -> PipelineConfig:
    """
    Build the effective pipeline configuration

    Args:
        path: flat key=value file with dotted keys (optional)
        overrides: values from command-line flags, applied last

    Returns:
        Validated PipelineConfig
    """
    config = PipelineConfig()
    if path is not None:
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file not found: {path}")
        config.update(dotenv_values(path))
    if overrides:
        config.update(overrides)
    return config.validate()
