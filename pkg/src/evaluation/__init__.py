"""Recognition metrics and corpus evaluation."""

from .metrics import (
    EvalReport,
    SampleResult,
    cer,
    edit_distance,
    evaluate_corpus,
    word_accuracy_36,
    word_prf,
)

__all__ = [
    "EvalReport",
    "SampleResult",
    "cer",
    "edit_distance",
    "evaluate_corpus",
    "word_accuracy_36",
    "word_prf",
]
