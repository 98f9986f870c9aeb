# src/storage/config_manager.py
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import psutil

from ..core.model.config import DecoderConfig, EncoderConfig, ModelConfig, get_preset
from ..core.search.beam_search import SearchConfig
from ..core.training.trainer import TrainingConfig
from ..data.augment import AugmentPolicy
from ..data.textgen import TextgenConfig
from ..utils.errors import ConfigError
from ..utils.logging import logger
from ..utils.validators import validate_positive_int, validate_seed
from .file_io import PathLike, read_text, write_json

RESOLVED_CONFIG_NAME = "resolved_config.json"
THREADS_ENV = "DESK_TROCR_THREADS"


@dataclass
class ModelSection:
    """A named preset plus explicit encoder/decoder field overrides."""
    preset: str = "desk-tiny"
    encoder: Dict[str, Any] = field(default_factory=dict)
    decoder: Dict[str, Any] = field(default_factory=dict)
    dtype: Optional[str] = None
    dropout: Optional[float] = None
    layer_norm_eps: Optional[float] = None

    def build(self) -> ModelConfig:
        base = get_preset(self.preset).to_dict()
        base["encoder"].update(self.encoder)
        base["decoder"].update(self.decoder)
        for name in ("dtype", "dropout", "layer_norm_eps"):
            value = getattr(self, name)
            if value is not None:
                base[name] = value
        return ModelConfig.from_dict(base).validate()


@dataclass
class TokenizerSection:
    vocab_size: int = 128

    def validate(self) -> "TokenizerSection":
        ok, message = validate_positive_int("tokenizer.vocab_size", self.vocab_size, minimum=5)
        if not ok:
            raise ConfigError(message)
        return self


@dataclass
class RuntimeSection:
    seed: int = 0
    threads: int = 0
    output_dir: str = "runs"

    def validate(self) -> "RuntimeSection":
        for ok, message in (validate_seed(self.seed),
                            validate_positive_int("runtime.threads", self.threads, minimum=0)):
            if not ok:
                raise ConfigError(message)
        return self


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    search: SearchConfig = field(default_factory=SearchConfig)
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    textgen: TextgenConfig = field(default_factory=TextgenConfig)
    tokenizer: TokenizerSection = field(default_factory=TokenizerSection)
    runtime: RuntimeSection = field(default_factory=RuntimeSection)


# Dict-valued fields whose keys are checked against another dataclass
_NESTED_KEYS = {
    ("model", "encoder"): EncoderConfig,
    ("model", "decoder"): DecoderConfig,
}


def default_threads() -> int:
    """DESK_TROCR_THREADS when set, else the physical core count."""
    value = os.getenv(THREADS_ENV)
    if value:
        try:
            threads = int(value)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}") from e
        if threads < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {threads}")
        return threads
    return psutil.cpu_count(logical=False) or 1


def _to_plain(value: Any) -> Any:
    if is_dataclass(value):
        return {k: _to_plain(v) for k, v in asdict(value).items()}
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    return value


def _build_section(cls, data: Any, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key {section}.{unknown[0]}", keys=[f"{section}.{k}" for k in unknown])
    for (parent, name), nested in _NESTED_KEYS.items():
        if parent == section and name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"{section}.{name} must be a JSON object")
            allowed = {f.name for f in fields(nested)}
            extra = sorted(set(data[name]) - allowed)
            if extra:
                raise ConfigError(f"unknown config key {section}.{name}.{extra[0]}")
    try:
        instance = cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid {section} section: {e}") from e
    defaults = cls()
    for name in data:
        if isinstance(getattr(defaults, name), tuple):
            value = getattr(instance, name)
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{section}.{name} must be a [low, high] pair")
            setattr(instance, name, tuple(value))
    return instance


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Set dotted keys such as "training.epochs" on a raw config dict."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        parts = dotted.split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override {dotted}: {part} is not an object")
        node[parts[-1]] = value
    return data


class ConfigManager:
    """Loads, validates and records the run configuration of one CLI command."""

    def __init__(self, config: Optional[RunConfig] = None, source: Optional[str] = None):
        self.config = config or RunConfig()
        self.source = source
        if not self.config.runtime.threads:
            self.config.runtime.threads = default_threads()
        self.validate()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None,
                  source: Optional[str] = None) -> "ConfigManager":
        raw = json.loads(json.dumps(dict(data)))
        apply_overrides(raw, overrides or {})
        unknown = sorted(set(raw) - {f.name for f in fields(RunConfig)})
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]}", keys=unknown)
        sections = {
            f.name: _build_section(type(getattr(RunConfig(), f.name)), raw.get(f.name, {}), f.name)
            for f in fields(RunConfig)
        }
        return cls(RunConfig(**sections), source)

    @classmethod
    def load(cls, path: Optional[PathLike] = None,
             overrides: Optional[Mapping[str, Any]] = None) -> "ConfigManager":
        """
        Load a JSON run configuration; a missing path means all defaults.

        Args:
            path: Config file, or None
            overrides: Dotted keys applied on top of the file

        Returns:
            Validated ConfigManager
        """
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                data = json.loads(read_text(path))
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
            if not isinstance(data, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
        manager = cls.from_dict(data, overrides, None if path is None else str(path))
        logger.debug(f"Loaded configuration from {path or 'defaults'}")
        return manager

    def validate(self) -> None:
        cfg = self.config
        self._model_config = cfg.model.build()
        cfg.search.validate()
        cfg.augment.validate()
        cfg.training.validate()
        cfg.textgen.validate()
        cfg.tokenizer.validate()
        cfg.runtime.validate()

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self._model_config.to_dict())

    @property
    def seed(self) -> int:
        return self.config.runtime.seed

    @property
    def threads(self) -> int:
        return self.config.runtime.threads

    def resolved(self) -> Dict[str, Any]:
        """Every setting with defaults filled in; reloading it gives the same configuration."""
        data = _to_plain(self.config)
        model = self._model_config.to_dict()
        data["model"] = {
            "preset": self.config.model.preset,
            "encoder": model["encoder"],
            "decoder": model["decoder"],
            "dtype": model["dtype"],
            "dropout": model["dropout"],
            "layer_norm_eps": model["layer_norm_eps"],
        }
        return data

    def write_resolved(self, out_dir: PathLike) -> Path:
        path = write_json(Path(out_dir) / RESOLVED_CONFIG_NAME, self.resolved())
        logger.debug(f"Wrote resolved configuration to {path}")
        return path
