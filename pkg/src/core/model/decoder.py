# src/core/model/decoder.py
"""Autoregressive text decoder with causal self-attention and cross-attention."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ...utils.errors import InputError, SequenceLengthError
from ..autodiff import ops
from ..autodiff.tensor import Tensor, no_grad
from .config import FFN_RATIO, DecoderConfig
from .layers import FeedForward, LayerNorm, Linear, Module, ModuleList, MultiHeadAttention, trunc_normal


@dataclass(frozen=True)
class AttentionMask:
    """allow[i, j] is True when query i may attend to key j."""
    allow: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.allow.shape


def causal_mask(length: int) -> AttentionMask:
    if length < 1:
        raise InputError(f"causal mask length must be >= 1, got {length}")
    return AttentionMask(np.tril(np.ones((length, length), dtype=bool)))


@dataclass
class LayerCache:
    self_keys: Optional[np.ndarray]
    self_values: Optional[np.ndarray]
    memory_keys: np.ndarray
    memory_values: np.ndarray


@dataclass
class DecoderState:
    """Per-sequence incremental decoding cache; rows follow the hypothesis batch."""
    layers: List[LayerCache]
    position: int

    def select(self, indices: np.ndarray) -> "DecoderState":
        """Reorder (and duplicate) cached rows to follow surviving hypotheses."""
        indices = np.asarray(indices, dtype=np.int64)
        layers = []
        for cache in self.layers:
            layers.append(LayerCache(
                self_keys=None if cache.self_keys is None else cache.self_keys[indices],
                self_values=None if cache.self_values is None else cache.self_values[indices],
                memory_keys=cache.memory_keys,
                memory_values=cache.memory_values,
            ))
        return DecoderState(layers=layers, position=self.position)


class DecoderBlock(Module):
    """Causal self-attention, then cross-attention over memory, then FFN; all pre-norm."""

    def __init__(self, config: DecoderConfig, memory_width: int, dtype: np.dtype,
                 eps: float, dropout: float):
        super().__init__()
        self.self_norm = LayerNorm(config.hidden, dtype, eps)
        self.self_attn = MultiHeadAttention(config.hidden, config.heads, dtype)
        self.cross_norm = LayerNorm(config.hidden, dtype, eps)
        self.cross_attn = MultiHeadAttention(config.hidden, config.heads, dtype, memory_width=memory_width)
        self.ffn_norm = LayerNorm(config.hidden, dtype, eps)
        self.ffn = FeedForward(config.hidden, FFN_RATIO, dtype, dropout)

    def __call__(self, x: Tensor, memory: Tensor, mask: np.ndarray,
                 rng: Optional[np.random.Generator] = None) -> Tensor:
        x = x + self.self_attn(self.self_norm(x), mask=mask)
        x = x + self.cross_attn(self.cross_norm(x), memory=memory)
        return x + self.ffn(self.ffn_norm(x), rng)

    def step(self, x: Tensor, cache: LayerCache) -> Tuple[Tensor, LayerCache]:
        h = self.self_norm(x)
        keys = self.self_attn.k_proj(h).data
        values = self.self_attn.v_proj(h).data
        if cache.self_keys is not None:
            keys = np.concatenate([cache.self_keys, keys], axis=-2)
            values = np.concatenate([cache.self_values, values], axis=-2)
        x = x + self.self_attn.attend(h, Tensor(keys), Tensor(values))
        x = x + self.cross_attn.attend(
            self.cross_norm(x), Tensor(cache.memory_keys), Tensor(cache.memory_values)
        )
        x = x + self.ffn(self.ffn_norm(x))
        return x, LayerCache(keys, values, cache.memory_keys, cache.memory_values)


class TextDecoder(Module):
    def __init__(self, config: DecoderConfig, memory_width: int, dtype: np.dtype,
                 eps: float = 1e-5, dropout: float = 0.0):
        super().__init__()
        self.config = config
        self.token_embed = Tensor(np.zeros((config.vocab, config.hidden)), requires_grad=True, dtype=dtype)
        self.pos_embed = Tensor(np.zeros((config.max_positions, config.hidden)), requires_grad=True, dtype=dtype)
        self.layers = ModuleList([
            DecoderBlock(config, memory_width, dtype, eps, dropout) for _ in range(config.layers)
        ])
        self.final_norm = LayerNorm(config.hidden, dtype, eps)
        self.output_proj = Linear(config.hidden, config.vocab, dtype)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        for tensor in (self.token_embed, self.pos_embed):
            tensor.data[...] = trunc_normal(tensor.shape, rng, tensor.dtype)

    def _embed(self, tokens: np.ndarray, start: int) -> Tensor:
        length = tokens.shape[-1]
        if start + length > self.config.max_positions:
            raise SequenceLengthError(
                f"decoder input of length {start + length} exceeds max_positions {self.config.max_positions}",
                length=start + length,
            )
        return ops.embedding_lookup(self.token_embed, tokens) + self.pos_embed[start:start + length]

    def __call__(self, tokens, memory: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Teacher-forced logits.

        Args:
            tokens: [T] or [B, T] token ids
            memory: encoder output, [S, D_enc] or [B, S, D_enc]

        Returns:
            Logits of shape [..., T, V]
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.shape[-1] < 1:
            raise InputError("decoder input must contain at least one token")
        x = self._embed(tokens, 0)
        mask = causal_mask(tokens.shape[-1]).allow
        for block in self.layers:
            x = block(x, memory, mask, rng)
        return self.output_proj(self.final_norm(x))

    def next_token_distribution(self, tokens, memory: Tensor) -> np.ndarray:
        """Softmax over the vocabulary for the token after the given prefix."""
        with no_grad():
            logits = self(tokens, memory)
            return ops.softmax(logits[..., -1, :]).data

    # --- incremental decoding --------------------------------------------
    def start(self, memory: Tensor) -> DecoderState:
        """Project the encoder memory once per layer; no self-attention history yet."""
        with no_grad():
            layers = []
            for block in self.layers:
                keys, values = block.cross_attn.project_memory(memory)
                layers.append(LayerCache(None, None, keys.data, values.data))
        return DecoderState(layers=layers, position=0)

    def step(self, state: DecoderState, tokens) -> Tuple[np.ndarray, DecoderState]:
        """
        Feed one token per hypothesis.

        Args:
            state: cache from start() or a previous step
            tokens: [B] ids, one per hypothesis row

        Returns:
            Tuple of ([B, V] log-probabilities, advanced state)
        """
        tokens = np.asarray(tokens, dtype=np.int64).reshape(-1, 1)
        with no_grad():
            x = self._embed(tokens, state.position)
            caches = []
            for block, cache in zip(self.layers, state.layers):
                x, cache = block.step(x, cache)
                caches.append(cache)
            logits = self.output_proj(self.final_norm(x)).data[:, -1, :]
        return ops.log_softmax_array(logits.astype(np.float64)), DecoderState(caches, state.position + 1)
