"""Pipeline configuration: serializable dataclasses plus seed derivation.

Every stage draws its seed as ``stage_seed(global_seed, stage_name)``, a
documented fan-out (stage-name hash XOR seed) so one knob reproduces a
whole run.  Configs round-trip through JSON and unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path

from fabula.extract import SplitSpec
from fabula.lm import SamplerConfig
from fabula.tuner import TunerConfig


class ConfigError(ValueError):
    pass


def stage_seed(seed: int, stage: str) -> int:
    """Derive a per-stage seed: blake2b(stage name) XOR the global seed."""
    digest = int.from_bytes(blake2b(stage.encode("utf-8"), digest_size=4).digest(), "big")
    return (int(seed) ^ digest) % (1 << 32)


@dataclass
class PathsConfig:
    data: str = "data"
    models: str = "models"
    outputs: str = "outputs"


@dataclass
class LmConfig:
    order: int = 4
    k_add: float = 0.01
    backoff: float = 0.4


@dataclass
class RescorerConfig:
    ngram_min: int = 1
    ngram_max: int = 4
    feature_dim: int = 1 << 20
    hash_seed: int = 0
    lr: float = 0.1
    epochs: int = 5
    l2: float = 1e-6
    batch_size: int = 16


@dataclass
class MetricsConfig:
    verb_lexicon: str | None = None


@dataclass
class FilterConfig:
    enabled: bool = True
    stopwords: str | None = None  # path to one-word-per-line file; None = built-in list


@dataclass
class UnkConfig:
    enabled: bool = False
    min_count: int = 10


@dataclass
class PipelineConfig:
    seed: int = 13
    paths: PathsConfig = field(default_factory=PathsConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    plot_sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(max_len=120))
    story_sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(max_len=250))
    lm: LmConfig = field(default_factory=LmConfig)
    rescorer: RescorerConfig = field(default_factory=RescorerConfig)
    tuner: TunerConfig = field(default_factory=TunerConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    unk: UnkConfig = field(default_factory=UnkConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2), encoding="utf-8"
        )


_SECTIONS = {
    "paths": PathsConfig,
    "split": SplitSpec,
    "plot_sampler": SamplerConfig,
    "story_sampler": SamplerConfig,
    "lm": LmConfig,
    "rescorer": RescorerConfig,
    "tuner": TunerConfig,
    "metrics": MetricsConfig,
    "filter": FilterConfig,
    "unk": UnkConfig,
}


def _build_section(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad values in {where}: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    data = dict(data)
    kwargs = {}
    if "seed" in data:
        kwargs["seed"] = int(data.pop("seed"))
    for name, cls in _SECTIONS.items():
        if name in data:
            section = data.pop(name)
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be an object")
            kwargs[name] = _build_section(cls, section, name)
    if data:
        raise ConfigError(f"unknown config keys: {sorted(data)}")
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return config_from_dict(raw)
