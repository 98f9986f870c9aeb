# src/core/model/encoder.py
"""ViT-style image encoder: resize, patchify, embed and self-attention blocks."""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ...data.images import ImageTensor
from ...utils.errors import ConfigError, InputError, SequenceLengthError
from ..autodiff import ops
from ..autodiff.tensor import Tensor
from .config import FFN_RATIO, EncoderConfig
from .layers import FeedForward, LayerNorm, Linear, Module, ModuleList, MultiHeadAttention, trunc_normal


def resize(img: ImageTensor, size: Tuple[int, int]) -> ImageTensor:
    """Bilinear resize with corner-aligned sampling.

    Output pixel (i, j) samples the source at (i * (H0 - 1) / (H - 1),
    j * (W0 - 1) / (W - 1)), so the four corners map onto each other.
    """
    height, width = int(size[0]), int(size[1])
    if img.height < 1 or img.width < 1:
        raise InputError(f"cannot resize an image with zero dimension {img.pixels.shape}")
    if height < 1 or width < 1:
        raise InputError(f"resize target must be at least 1x1, got {(height, width)}")
    if (height, width) == (img.height, img.width):
        return img.copy()
    rows = np.linspace(0.0, img.height - 1, height) if height > 1 else np.zeros(1)
    cols = np.linspace(0.0, img.width - 1, width) if width > 1 else np.zeros(1)
    grid = np.meshgrid(rows, cols, indexing="ij")
    channels = [
        ndimage.map_coordinates(plane, grid, order=1, mode="nearest")
        for plane in img.pixels
    ]
    return ImageTensor(np.stack(channels))


def patchify(img: ImageTensor, patch: int) -> np.ndarray:
    """[C, H, W] -> [N, C*P*P], patches row-major, each flattened channel-major then row-major."""
    channels, height, width = img.pixels.shape
    if patch < 1 or height % patch or width % patch:
        raise ConfigError(f"image ({height}, {width}) is not divisible into {patch}x{patch} patches")
    rows, cols = height // patch, width // patch
    blocks = img.pixels.reshape(channels, rows, patch, cols, patch).transpose(1, 3, 0, 2, 4)
    return blocks.reshape(rows * cols, channels * patch * patch)


class EncoderBlock(Module):
    """Pre-norm block: x + attn(norm(x)), then x + ffn(norm(x))."""

    def __init__(self, config: EncoderConfig, dtype: np.dtype, eps: float, dropout: float):
        super().__init__()
        self.attn_norm = LayerNorm(config.hidden, dtype, eps)
        self.attn = MultiHeadAttention(config.hidden, config.heads, dtype)
        self.ffn_norm = LayerNorm(config.hidden, dtype, eps)
        self.ffn = FeedForward(config.hidden, FFN_RATIO, dtype, dropout)

    def __call__(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        x = x + self.attn(self.attn_norm(x))
        return x + self.ffn(self.ffn_norm(x), rng)


class VisionEncoder(Module):
    def __init__(self, config: EncoderConfig, dtype: np.dtype, eps: float = 1e-5, dropout: float = 0.0):
        super().__init__()
        self.config = config
        width = config.hidden
        self.patch_embed = Linear(config.patch_dim, width, dtype)
        self.cls_token = Tensor(np.zeros(width), requires_grad=True, dtype=dtype)
        if config.use_distillation_token:
            self.dist_token = Tensor(np.zeros(width), requires_grad=True, dtype=dtype)
        self.pos_embed = Tensor(np.zeros((config.sequence_length, width)), requires_grad=True, dtype=dtype)
        self.layers = ModuleList([EncoderBlock(config, dtype, eps, dropout) for _ in range(config.layers)])
        self.final_norm = LayerNorm(width, dtype, eps)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        for name in ("cls_token", "dist_token", "pos_embed"):
            tensor = self._parameters.get(name)
            if tensor is not None:
                tensor.data[...] = trunc_normal(tensor.shape, rng, tensor.dtype)

    def special_tokens(self) -> Sequence[Tensor]:
        if self.config.use_distillation_token:
            return (self.cls_token, self.dist_token)
        return (self.cls_token,)

    def embed(self, patches: Tensor) -> Tensor:
        """
        Project patches and prepend the special tokens.

        Args:
            patches: [N, C*P*P] or [B, N, C*P*P]

        Returns:
            [N + specials, D] (or batched) with position embeddings added
        """
        num_patches = patches.shape[-2]
        length = num_patches + self.config.num_special
        if length > self.pos_embed.shape[0]:
            raise SequenceLengthError(
                f"{num_patches} patches plus {self.config.num_special} special tokens exceed "
                f"the {self.pos_embed.shape[0]} position embeddings",
                length=length,
            )
        projected = self.patch_embed(patches)
        lead = patches.shape[:-2]
        width = self.config.hidden
        specials = [
            ops.broadcast_to(ops.reshape(token, (1, width)), lead + (1, width))
            for token in self.special_tokens()
        ]
        sequence = ops.concat(specials + [projected], axis=-2)
        return sequence + self.pos_embed[:length]

    def __call__(self, patches: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        x = self.embed(patches)
        for block in self.layers:
            x = block(x, rng)
        return self.final_norm(x)


def prepare_patches(images: Sequence[ImageTensor], config: EncoderConfig, dtype: np.dtype) -> Tensor:
    """Resize, convert channels and patchify a batch into a [B, N, C*P*P] tensor."""
    batch = []
    for img in images:
        img = resize(img.with_channels(config.channels), config.image_size)
        batch.append(patchify(img, config.patch))
    return Tensor(np.stack(batch), dtype=dtype)
