"""Encoder-decoder OCR model."""

from .config import PRESETS, DecoderConfig, EncoderConfig, ModelConfig, get_preset, parameter_shapes
from .decoder import AttentionMask, DecoderState, TextDecoder, causal_mask
from .encoder import VisionEncoder, patchify, prepare_patches, resize
from .model import VisionEncoderDecoder
from .weight_import import ImportReport, MappingRule, identity_rules, import_partial, last_half_layer_rules

__all__ = [
    "EncoderConfig",
    "DecoderConfig",
    "ModelConfig",
    "PRESETS",
    "get_preset",
    "parameter_shapes",
    "VisionEncoder",
    "TextDecoder",
    "VisionEncoderDecoder",
    "AttentionMask",
    "DecoderState",
    "causal_mask",
    "resize",
    "patchify",
    "prepare_patches",
    "MappingRule",
    "ImportReport",
    "identity_rules",
    "import_partial",
    "last_half_layer_rules",
]
