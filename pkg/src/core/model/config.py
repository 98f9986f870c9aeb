# src/core/model/config.py
"""Architecture hyperparameters, named presets and parameter accounting."""

from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Tuple

from ...utils.errors import ConfigError
from ...utils.validators import validate_heads, validate_patch_geometry, validate_positive_int
from ..autodiff.tensor import SUPPORTED_DTYPES

FFN_RATIO = 4
DEFAULT_DECODER_POSITIONS = 512


@dataclass
class EncoderConfig:
    """Image encoder geometry and width."""
    image_size: Tuple[int, int] = (16, 128)
    patch: int = 4
    channels: int = 1
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    use_distillation_token: bool = False

    def __post_init__(self):
        self.image_size = tuple(int(v) for v in self.image_size)

    @property
    def num_special(self) -> int:
        return 2 if self.use_distillation_token else 1

    @property
    def num_patches(self) -> int:
        height, width = self.image_size
        return (height // self.patch) * (width // self.patch)

    @property
    def sequence_length(self) -> int:
        return self.num_patches + self.num_special

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch * self.patch

    def validate(self) -> None:
        if len(self.image_size) != 2:
            raise ConfigError(f"encoder.image_size must be (height, width), got {self.image_size}")
        checks = [
            validate_positive_int("encoder.image_size[0]", self.image_size[0]),
            validate_positive_int("encoder.image_size[1]", self.image_size[1]),
            validate_positive_int("encoder.patch", self.patch),
            validate_positive_int("encoder.hidden", self.hidden),
            validate_positive_int("encoder.layers", self.layers, minimum=0),
            validate_heads("encoder", self.hidden, self.heads),
            validate_patch_geometry(self.image_size[0], self.image_size[1], self.patch),
        ]
        if self.channels not in (1, 3):
            checks.append((False, f"encoder.channels must be 1 or 3, got {self.channels}"))
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)


@dataclass
class DecoderConfig:
    """Text decoder width, depth and vocabulary."""
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    vocab: int = 128
    max_positions: int = DEFAULT_DECODER_POSITIONS

    def validate(self) -> None:
        checks = [
            validate_positive_int("decoder.hidden", self.hidden),
            validate_positive_int("decoder.layers", self.layers, minimum=0),
            validate_heads("decoder", self.hidden, self.heads),
            validate_positive_int("decoder.vocab", self.vocab, minimum=5),
            validate_positive_int("decoder.max_positions", self.max_positions),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    dtype: str = "float32"
    dropout: float = 0.0
    layer_norm_eps: float = 1e-5

    def validate(self) -> "ModelConfig":
        self.encoder.validate()
        self.decoder.validate()
        if self.dtype not in SUPPORTED_DTYPES:
            raise ConfigError(f"model.dtype must be one of {sorted(SUPPORTED_DTYPES)}, got {self.dtype!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"model.dropout must be in [0, 1), got {self.dropout}")
        if self.layer_norm_eps <= 0:
            raise ConfigError(f"model.layer_norm_eps must be > 0, got {self.layer_norm_eps}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["encoder"]["image_size"] = list(self.encoder.image_size)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        try:
            return cls(
                encoder=EncoderConfig(**data.get("encoder", {})),
                decoder=DecoderConfig(**data.get("decoder", {})),
                dtype=data.get("dtype", "float32"),
                dropout=data.get("dropout", 0.0),
                layer_norm_eps=data.get("layer_norm_eps", 1e-5),
            )
        except TypeError as e:
            raise ConfigError(f"invalid model config: {e}") from e

    def with_dtype(self, dtype: str) -> "ModelConfig":
        return replace(self, dtype=dtype)

    def parameter_shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        return parameter_shapes(self)

    def parameter_count(self) -> int:
        total = 0
        for shape in parameter_shapes(self).values():
            count = 1
            for dim in shape:
                count *= dim
            total += count
        return total


def _norm(prefix: str, width: int) -> Dict[str, Tuple[int, ...]]:
    return {f"{prefix}.gain": (width,), f"{prefix}.bias": (width,)}


def _linear(prefix: str, fan_in: int, fan_out: int) -> Dict[str, Tuple[int, ...]]:
    return {f"{prefix}.weight": (fan_in, fan_out), f"{prefix}.bias": (fan_out,)}


def _attention(prefix: str, width: int, memory_width: int) -> Dict[str, Tuple[int, ...]]:
    shapes: Dict[str, Tuple[int, ...]] = {}
    shapes.update(_linear(f"{prefix}.q_proj", width, width))
    shapes.update(_linear(f"{prefix}.k_proj", memory_width, width))
    shapes.update(_linear(f"{prefix}.v_proj", memory_width, width))
    shapes.update(_linear(f"{prefix}.out_proj", width, width))
    return shapes


def _ffn(prefix: str, width: int) -> Dict[str, Tuple[int, ...]]:
    shapes = _linear(f"{prefix}.fc1", width, FFN_RATIO * width)
    shapes.update(_linear(f"{prefix}.fc2", FFN_RATIO * width, width))
    return shapes


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Every parameter name and shape, in the order the model registers them."""
    enc, dec = config.encoder, config.decoder
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["encoder.cls_token"] = (enc.hidden,)
    if enc.use_distillation_token:
        shapes["encoder.dist_token"] = (enc.hidden,)
    shapes["encoder.pos_embed"] = (enc.sequence_length, enc.hidden)
    shapes.update(_linear("encoder.patch_embed", enc.patch_dim, enc.hidden))
    for i in range(enc.layers):
        prefix = f"encoder.layers.{i}"
        shapes.update(_norm(f"{prefix}.attn_norm", enc.hidden))
        shapes.update(_attention(f"{prefix}.attn", enc.hidden, enc.hidden))
        shapes.update(_norm(f"{prefix}.ffn_norm", enc.hidden))
        shapes.update(_ffn(f"{prefix}.ffn", enc.hidden))
    shapes.update(_norm("encoder.final_norm", enc.hidden))

    shapes["decoder.token_embed"] = (dec.vocab, dec.hidden)
    shapes["decoder.pos_embed"] = (dec.max_positions, dec.hidden)
    for i in range(dec.layers):
        prefix = f"decoder.layers.{i}"
        shapes.update(_norm(f"{prefix}.self_norm", dec.hidden))
        shapes.update(_attention(f"{prefix}.self_attn", dec.hidden, dec.hidden))
        shapes.update(_norm(f"{prefix}.cross_norm", dec.hidden))
        shapes.update(_attention(f"{prefix}.cross_attn", dec.hidden, enc.hidden))
        shapes.update(_norm(f"{prefix}.ffn_norm", dec.hidden))
        shapes.update(_ffn(f"{prefix}.ffn", dec.hidden))
    shapes.update(_norm("decoder.final_norm", dec.hidden))
    shapes.update(_linear("decoder.output_proj", dec.hidden, dec.vocab))
    return shapes


def _reference_encoder(hidden: int, layers: int, heads: int, distill: bool) -> EncoderConfig:
    return EncoderConfig(image_size=(384, 384), patch=16, channels=3, hidden=hidden,
                         layers=layers, heads=heads, use_distillation_token=distill)


PRESETS: Dict[str, ModelConfig] = {
    "trocr-small": ModelConfig(
        encoder=_reference_encoder(384, 12, 6, True),
        decoder=DecoderConfig(hidden=256, layers=6, heads=8, vocab=64044),
    ),
    "trocr-base": ModelConfig(
        encoder=_reference_encoder(768, 12, 12, False),
        decoder=DecoderConfig(hidden=1024, layers=12, heads=16, vocab=50265),
    ),
    "trocr-large": ModelConfig(
        encoder=_reference_encoder(1024, 24, 16, False),
        decoder=DecoderConfig(hidden=1024, layers=12, heads=16, vocab=50265),
    ),
    "desk-tiny": ModelConfig(
        encoder=EncoderConfig(image_size=(16, 128), patch=4, channels=1, hidden=64, layers=2, heads=4),
        decoder=DecoderConfig(hidden=64, layers=2, heads=4, vocab=128, max_positions=128),
    ),
    "desk-small": ModelConfig(
        encoder=EncoderConfig(image_size=(16, 128), patch=4, channels=1, hidden=64, layers=2, heads=4),
        decoder=DecoderConfig(hidden=64, layers=2, heads=4, vocab=512, max_positions=128),
    ),
    "desk-large": ModelConfig(
        encoder=EncoderConfig(image_size=(32, 256), patch=4, channels=1, hidden=128, layers=4, heads=8),
        decoder=DecoderConfig(hidden=128, layers=4, heads=8, vocab=512, max_positions=128),
    ),
}


def get_preset(name: str) -> ModelConfig:
    """Return a fresh copy of a named preset."""
    if name not in PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; known presets: {sorted(PRESETS)}")
    return ModelConfig.from_dict(PRESETS[name].to_dict())
