"""Toy step models and tiny configs shared by the test suites."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.core.autodiff.ops import log_softmax_array
from src.core.model.config import DecoderConfig, EncoderConfig, ModelConfig

SMALL_CORPUS = ["hello world", "total paid", "cash change", "hello total", "ink pen"]


def micro_config(dtype: str = "float64", vocab: int = 12, distill: bool = False,
                 layers: int = 1) -> ModelConfig:
    """Smallest useful encoder-decoder: 8x16 grayscale input, width 8."""
    return ModelConfig(
        encoder=EncoderConfig(image_size=(8, 16), patch=4, channels=1, hidden=8,
                              layers=layers, heads=2, use_distillation_token=distill),
        decoder=DecoderConfig(hidden=8, layers=layers, heads=2, vocab=vocab, max_positions=16),
        dtype=dtype,
    )


def tiny_config(vocab: int, dtype: str = "float32") -> ModelConfig:
    """Desk-tiny geometry with a vocabulary sized to a test tokenizer."""
    return ModelConfig(
        encoder=EncoderConfig(image_size=(16, 64), patch=4, channels=1, hidden=32, layers=1, heads=4),
        decoder=DecoderConfig(hidden=32, layers=1, heads=4, vocab=vocab, max_positions=32),
        dtype=dtype,
    )


@dataclass
class ToyState:
    prefixes: List[Tuple[int, ...]]

    def select(self, indices: np.ndarray) -> "ToyState":
        return ToyState([self.prefixes[int(i)] for i in indices])


class ToyStepModel:
    """Random next-token model whose distribution depends on the whole prefix.

    Each prefix seeds its own generator, so the same prefix always gets the
    same log-probabilities regardless of the order searches visit it in.
    """

    def __init__(self, vocab: int, seed: int, sharpness: float = 2.0):
        self.vocab = vocab
        self.seed = seed
        self.sharpness = sharpness

    def distribution(self, prefix: Sequence[int]) -> np.ndarray:
        rng = np.random.default_rng([self.seed, len(prefix), *prefix])
        return log_softmax_array(self.sharpness * rng.standard_normal(self.vocab))

    def start(self, memory) -> ToyState:
        return ToyState([()])

    def step(self, state: ToyState, tokens: Sequence[int]):
        prefixes = [prefix + (int(token),) for prefix, token in zip(state.prefixes, tokens)]
        rows = np.stack([self.distribution(prefix) for prefix in prefixes])
        return rows, ToyState(prefixes)


class ScriptedStepModel:
    """Emits a fixed token sequence with near-certainty, one token per step."""

    def __init__(self, script: Sequence[int], vocab: int):
        self.script = list(script)
        self.vocab = vocab

    def start(self, memory) -> ToyState:
        return ToyState([()])

    def step(self, state: ToyState, tokens: Sequence[int]):
        prefixes = [prefix + (int(token),) for prefix, token in zip(state.prefixes, tokens)]
        rows = []
        for prefix in prefixes:
            logits = np.zeros(self.vocab)
            position = len(prefix) - 1
            target = self.script[min(position, len(self.script) - 1)]
            logits[target] = 20.0
            rows.append(log_softmax_array(logits))
        return np.stack(rows), ToyState(prefixes)

