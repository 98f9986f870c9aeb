# src/core/model/model.py
"""Vision encoder + text decoder composite."""

from collections import OrderedDict
from typing import Dict, Optional, Sequence

import numpy as np

from ...data.images import ImageTensor
from ...utils.errors import CheckpointShapeError
from ...utils.logging import logger
from ...utils.seeding import make_rng
from ..autodiff.tensor import Tensor, no_grad, resolve_dtype
from .config import ModelConfig
from .decoder import TextDecoder
from .encoder import VisionEncoder, prepare_patches
from .layers import Module, reset_all


class VisionEncoderDecoder(Module):
    """The OCR model: image patches in, vocabulary logits out."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        config.validate()
        self.config = config
        dtype = resolve_dtype(config.dtype)
        self.dtype = dtype
        self.encoder = VisionEncoder(config.encoder, dtype, config.layer_norm_eps, config.dropout)
        self.decoder = TextDecoder(config.decoder, config.encoder.hidden, dtype,
                                   config.layer_norm_eps, config.dropout)
        self.initialize(seed)

    def initialize(self, seed: int) -> None:
        """Truncated-normal weights (std 0.02), zero biases, unit norm gains."""
        reset_all(self, make_rng(seed, 0x1A17))
        logger.debug(f"Initialized {self.config.parameter_count()} parameters with seed {seed}")

    def prepare_images(self, images: Sequence[ImageTensor]) -> Tensor:
        return prepare_patches(images, self.config.encoder, self.dtype)

    def encode(self, images: Sequence[ImageTensor], rng: Optional[np.random.Generator] = None) -> Tensor:
        """Batch of images -> memory [B, N + specials, D_enc]."""
        return self.encoder(self.prepare_images(images), rng)

    def encode_one(self, image: ImageTensor) -> Tensor:
        """Memory for a single image, [1, N + specials, D_enc], without a graph."""
        with no_grad():
            return self.encode([image])

    def __call__(self, images: Sequence[ImageTensor], tokens: np.ndarray,
                 rng: Optional[np.random.Generator] = None) -> Tensor:
        memory = self.encode(images, rng)
        return self.decoder(tokens, memory, rng)

    # --- state dict --------------------------------------------------------
    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, param.data) for name, param in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy every parameter from state; names and shapes must match exactly."""
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise CheckpointShapeError(
                f"parameter names differ: missing {missing[:5]}, unexpected {unexpected[:5]}",
                missing=missing, unexpected=unexpected,
            )
        for name, param in own.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise CheckpointShapeError(
                    f"parameter {name} has shape {value.shape}, model expects {param.shape}",
                    parameter=name,
                )
            param.data[...] = value.astype(param.dtype, copy=False)
