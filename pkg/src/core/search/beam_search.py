# src/core/search/beam_search.py
"""Greedy and beam-search generation over an incremental step model."""

from dataclasses import dataclass, field
from typing import Any, List, Protocol, Sequence, Tuple

import numpy as np

from ...utils.errors import ConfigError
from ...utils.validators import validate_positive_int
from ..tokenizer.bpe import BOS_ID, EOS_ID


class StepState(Protocol):
    def select(self, indices: np.ndarray) -> "StepState": ...


class StepModel(Protocol):
    """Anything that scores next tokens one position at a time (TextDecoder does)."""

    def start(self, memory: Any) -> StepState: ...

    def step(self, state: StepState, tokens: Sequence[int]) -> Tuple[np.ndarray, StepState]: ...


class RestrictedVocabulary:
    """Step model wrapper that never proposes ids at or above `limit`.

    Used when the decoder's output layer is wider than the tokenizer.
    """

    def __init__(self, model: StepModel, limit: int):
        self.model = model
        self.limit = limit

    def start(self, memory: Any) -> StepState:
        return self.model.start(memory)

    def step(self, state: StepState, tokens: Sequence[int]) -> Tuple[np.ndarray, StepState]:
        log_probs, state = self.model.step(state, tokens)
        log_probs = np.array(log_probs, dtype=np.float64)
        if self.limit < log_probs.shape[-1]:
            log_probs[..., self.limit:] = -np.inf
        return log_probs, state


@dataclass
class SearchConfig:
    beam: int = 10
    max_len: int = 64
    length_penalty: float = 0.0

    def validate(self) -> "SearchConfig":
        for name, value in (("search.beam", self.beam), ("search.max_len", self.max_len)):
            ok, message = validate_positive_int(name, value)
            if not ok:
                raise ConfigError(message)
        if self.length_penalty < 0:
            raise ConfigError(f"search.length_penalty must be >= 0, got {self.length_penalty}")
        return self


@dataclass
class Hypothesis:
    """ids start with BOS and end with EOS when finished."""
    ids: List[int]
    score: float
    finished: bool = False
    normalized_score: float = field(default=0.0, compare=False)

    @property
    def tokens(self) -> List[int]:
        """Generated ids without BOS and EOS."""
        body = self.ids[1:]
        return body[:-1] if self.finished else body

    @property
    def length(self) -> int:
        return len(self.ids) - 1


@dataclass
class GreedyResult:
    tokens: List[int]
    score: float
    truncated: bool


def length_normalizer(length: int, alpha: float) -> float:
    """GNMT length penalty ((5 + length) / 6) ** alpha; 1.0 when alpha is 0."""
    if alpha == 0.0:
        return 1.0
    return ((5.0 + length) / 6.0) ** alpha


def greedy(memory: Any, model: StepModel, max_len: int,
           bos_id: int = BOS_ID, eos_id: int = EOS_ID) -> GreedyResult:
    """Argmax decoding; ties resolve to the lowest token id."""
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    state = model.start(memory)
    tokens: List[int] = []
    score = 0.0
    last = bos_id
    for _ in range(max_len):
        log_probs, state = model.step(state, [last])
        row = np.asarray(log_probs)[0]
        last = int(np.argmax(row))
        score += float(row[last])
        if last == eos_id:
            return GreedyResult(tokens, score, truncated=False)
        tokens.append(last)
    return GreedyResult(tokens, score, truncated=True)


def beam_search(memory: Any, model: StepModel, config: SearchConfig,
                bos_id: int = BOS_ID, eos_id: int = EOS_ID) -> List[Hypothesis]:
    """
    Beam search ranked by summed log-probability.

    Each step expands every live hypothesis by every token and keeps the best
    ``beam`` candidates, ordered by (score desc, parent index, token id).
    Candidates ending in EOS retire to the finished pool, shrinking the live
    beam. Without a length penalty the search stops once no live score beats
    the best finished score. Hypotheses still live at max_len are returned
    with finished=False.

    Returns:
        Up to ``beam`` hypotheses, best first
    """
    config.validate()
    alpha = config.length_penalty
    state = model.start(memory)
    live = [Hypothesis([bos_id], 0.0)]
    finished: List[Hypothesis] = []

    for _ in range(config.max_len):
        log_probs, state = model.step(state, [h.ids[-1] for h in live])
        log_probs = np.asarray(log_probs, dtype=np.float64)
        totals = np.array([h.score for h in live])[:, None] + log_probs
        vocab = totals.shape[1]
        parents = np.repeat(np.arange(len(live)), vocab)
        token_ids = np.tile(np.arange(vocab), len(live))
        flat = totals.reshape(-1)
        order = np.lexsort((token_ids, parents, -flat))[:config.beam]

        survivors: List[Hypothesis] = []
        keep_rows: List[int] = []
        for index in order:
            parent, token = int(parents[index]), int(token_ids[index])
            hyp = Hypothesis(live[parent].ids + [token], float(flat[index]))
            if token == eos_id:
                hyp.finished = True
                finished.append(hyp)
            else:
                survivors.append(hyp)
                keep_rows.append(parent)

        live = survivors
        if not live:
            break
        state = state.select(np.asarray(keep_rows))
        if alpha == 0.0 and finished:
            if max(h.score for h in live) <= max(h.score for h in finished):
                live = []
                break

    pool = finished + live
    for hyp in pool:
        hyp.normalized_score = hyp.score / length_normalizer(hyp.length, alpha)
    ranked = sorted(enumerate(pool), key=lambda item: (-item[1].normalized_score, item[0]))
    return [hyp for _, hyp in ranked[:config.beam]]


def exhaustive_search(memory: Any, model: StepModel, max_len: int,
                      bos_id: int = BOS_ID, eos_id: int = EOS_ID) -> Hypothesis:
    """Score every sequence up to max_len; only practical for toy vocabularies."""
    best = None
    frontier = [(Hypothesis([bos_id], 0.0), model.start(memory))]
    for _ in range(max_len):
        next_frontier = []
        for hyp, state in frontier:
            log_probs, new_state = model.step(state, [hyp.ids[-1]])
            row = np.asarray(log_probs, dtype=np.float64)[0]
            for token, value in enumerate(row):
                child = Hypothesis(hyp.ids + [token], hyp.score + float(value), finished=token == eos_id)
                if child.finished:
                    if best is None or child.score > best.score:
                        best = child
                else:
                    next_frontier.append((child, new_state))
        frontier = next_frontier
    for hyp, _ in frontier:
        if best is None or hyp.score > best.score:
            best = hyp
    return best
