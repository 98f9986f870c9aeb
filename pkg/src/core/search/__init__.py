"""Sequence generation from the decoder."""

from .beam_search import (
    GreedyResult,
    Hypothesis,
    RestrictedVocabulary,
    SearchConfig,
    StepModel,
    beam_search,
    exhaustive_search,
    greedy,
    length_normalizer,
)

__all__ = [
    "SearchConfig",
    "Hypothesis",
    "GreedyResult",
    "StepModel",
    "RestrictedVocabulary",
    "greedy",
    "beam_search",
    "exhaustive_search",
    "length_normalizer",
]
