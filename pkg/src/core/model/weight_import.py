# src/core/model/weight_import.py
"""Partial weight import with explicit name-mapping rules.

A rule maps a source name prefix to a destination prefix. Prefixes may hold
a ``{layer}`` placeholder; the source layer index plus ``layer_offset``
gives the destination layer index. Destination parameters no rule fills
keep their fresh initialisation.
"""

import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ...utils.errors import ConfigError, WeightImportError
from ...utils.logging import logger
from .model import VisionEncoderDecoder

LAYER_PLACEHOLDER = "{layer}"


@dataclass
class MappingRule:
    source: str
    target: str
    layer_offset: int = 0

    def __post_init__(self):
        if (LAYER_PLACEHOLDER in self.source) != (LAYER_PLACEHOLDER in self.target):
            raise ConfigError(
                f"mapping rule {self.source!r} -> {self.target!r} must use {LAYER_PLACEHOLDER} on both sides or neither"
            )
        self._pattern = re.compile(
            "^" + re.escape(self.source).replace(re.escape(LAYER_PLACEHOLDER), r"(\d+)")
        )

    @classmethod
    def from_dict(cls, data: Mapping) -> "MappingRule":
        unknown = set(data) - {"source", "target", "layer_offset"}
        if unknown:
            raise ConfigError(f"unknown mapping rule keys: {sorted(unknown)}")
        try:
            return cls(str(data["source"]), str(data["target"]), int(data.get("layer_offset", 0)))
        except KeyError as e:
            raise ConfigError(f"mapping rule is missing {e.args[0]!r}") from e

    def to_dict(self) -> Dict:
        return {"source": self.source, "target": self.target, "layer_offset": self.layer_offset}

    def map_name(self, name: str) -> Optional[str]:
        """Destination name for a source parameter, or None when the rule does not apply."""
        match = self._pattern.match(name)
        if match is None:
            return None
        rest = name[match.end():]
        if LAYER_PLACEHOLDER not in self.source:
            return self.target + rest
        layer = int(match.group(1)) + self.layer_offset
        if layer < 0:
            return None
        return self.target.replace(LAYER_PLACEHOLDER, str(layer)) + rest


@dataclass
class ImportReport:
    loaded: List[str] = field(default_factory=list)
    randomly_initialized: List[str] = field(default_factory=list)
    skipped_source: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, List[str]]:
        return {
            "loaded": self.loaded,
            "randomly_initialized": self.randomly_initialized,
            "skipped_source": self.skipped_source,
        }


def identity_rules() -> List[MappingRule]:
    """Copy every parameter under its own name."""
    return [MappingRule("encoder.", "encoder."), MappingRule("decoder.", "decoder.")]


def last_half_layer_rules(source_prefix: str, target_prefix: str, source_layers: int,
                          target_layers: Optional[int] = None) -> List[MappingRule]:
    """
    Map the last half of a deeper source stack onto a shallower destination stack.

    Args:
        source_prefix: e.g. "decoder.layers.{layer}."
        target_prefix: e.g. "decoder.layers.{layer}."
        source_layers: depth of the source stack
        target_layers: depth of the destination; defaults to half the source

    Returns:
        One rule whose layer_offset shifts source layer k to k - (source_layers - target_layers)
    """
    target_layers = source_layers // 2 if target_layers is None else target_layers
    if target_layers < 1 or target_layers > source_layers:
        raise ConfigError(f"cannot map {source_layers} source layers onto {target_layers}")
    return [MappingRule(source_prefix, target_prefix, layer_offset=target_layers - source_layers)]


def import_partial(checkpoint_params: Mapping[str, np.ndarray], model: VisionEncoderDecoder,
                   rules: Sequence[MappingRule]) -> ImportReport:
    """
    Copy mapped source parameters into model; the first matching rule wins.

    Raises:
        WeightImportError: a mapped parameter has an incompatible shape
    """
    destination = dict(model.named_parameters())
    report = ImportReport()
    assigned: Dict[str, str] = {}
    staged: List[Tuple[Any, np.ndarray]] = []
    mismatched: List[str] = []

    for source_name, value in checkpoint_params.items():
        target_name = None
        for rule in rules:
            target_name = rule.map_name(source_name)
            if target_name is not None:
                break
        if target_name is None or target_name not in destination:
            report.skipped_source.append(source_name)
            continue
        param = destination[target_name]
        value = np.asarray(value)
        if value.shape != param.shape:
            mismatched.append(f"{source_name} {value.shape} -> {target_name} {param.shape}")
            continue
        assigned[target_name] = source_name
        staged.append((param, value))

    # nothing is copied unless every mapped shape fits
    if mismatched:
        raise WeightImportError(
            f"shape-incompatible parameters: {', '.join(mismatched)}", parameters=mismatched
        )
    for param, value in staged:
        param.data[...] = value.astype(param.dtype, copy=False)

    for name in destination:
        (report.loaded if name in assigned else report.randomly_initialized).append(name)
    logger.info(
        f"Imported {len(report.loaded)} parameters; {len(report.randomly_initialized)} keep fresh init, "
        f"{len(report.skipped_source)} source parameters unused"
    )
    return report
