# src/evaluation/metrics.py
"""
Recognition metrics: word-level precision/recall/F1, character error rate,
and 36-character word accuracy, plus corpus aggregation.

Words are whitespace-split and matched case-sensitively as multisets, so a
word repeated in the ground truth must be repeated in the prediction to
count twice. Corpus P/R/F1 are micro-averaged from summed counts.
"""

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from ..storage.dataset_storage import ManifestEntry
from ..utils.errors import EvaluationError
from ..utils.logging import logger

_NON_ALNUM = re.compile(r"[^a-z0-9]")


def word_prf(pred: str, gt: str) -> Tuple[int, int, int]:
    """(correct, detected, truth) word counts for one sample."""
    pred_words = Counter(pred.split())
    gt_words = Counter(gt.split())
    correct = sum((pred_words & gt_words).values())
    return correct, sum(pred_words.values()), sum(gt_words.values())


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over code points with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    target = np.array([ord(c) for c in b])
    previous = np.arange(len(b) + 1)
    for i, char in enumerate(a, start=1):
        substitution = previous[:-1] + (target != ord(char))
        current = np.empty_like(previous)
        current[0] = i
        current[1:] = np.minimum(previous[1:] + 1, substitution)
        # insertions chain left to right within the row
        current = np.minimum.accumulate(current - np.arange(len(current))) + np.arange(len(current))
        previous = current
    return int(previous[-1])


def cer(pred: str, gt: str) -> float:
    """Case-sensitive character error rate: edit distance / max(1, len(gt)). May exceed 1."""
    return edit_distance(pred, gt) / max(1, len(gt))


def filter_36(text: str) -> str:
    return _NON_ALNUM.sub("", text.lower())


def word_accuracy_36(pred: str, gt: str) -> bool:
    """Exact match after lowercasing and dropping everything outside [a-z0-9]."""
    return filter_36(pred) == filter_36(gt)


@dataclass
class SampleResult:
    id: str
    cer: float
    exact_match_36char: bool
    correct: int
    detected: int
    truth: int

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "cer": self.cer, "exact_match_36char": self.exact_match_36char}


@dataclass
class EvalReport:
    per_sample: List[SampleResult] = field(default_factory=list)
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    mean_cer: float = 0.0
    word_accuracy: float = 0.0
    detected_words: int = 0
    ground_truth_words: int = 0
    correct_matches: int = 0
    scene_word_accuracy: Any = None
    scene_samples: int = 0

    @classmethod
    def from_samples(cls, samples: Sequence[SampleResult], scene_flags: Sequence[bool] = ()) -> "EvalReport":
        correct = sum(s.correct for s in samples)
        detected = sum(s.detected for s in samples)
        truth = sum(s.truth for s in samples)
        precision = correct / detected if detected else 0.0
        recall = correct / truth if truth else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        count = len(samples)
        report = cls(
            per_sample=list(samples),
            precision=precision,
            recall=recall,
            f1=f1,
            mean_cer=float(np.mean([s.cer for s in samples])) if count else 0.0,
            word_accuracy=sum(s.exact_match_36char for s in samples) / count if count else 0.0,
            detected_words=detected,
            ground_truth_words=truth,
            correct_matches=correct,
        )
        if scene_flags:
            scene = [s for s, flag in zip(samples, scene_flags) if flag]
            report.scene_samples = len(scene)
            report.scene_word_accuracy = (
                sum(s.exact_match_36char for s in scene) / len(scene) if scene else 0.0
            )
        return report

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "aggregate": {
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "mean_cer": self.mean_cer,
                "word_accuracy": self.word_accuracy,
            },
            "counts": {
                "detected_words": self.detected_words,
                "ground_truth_words": self.ground_truth_words,
                "correct_matches": self.correct_matches,
                "samples": len(self.per_sample),
            },
            "per_sample": [s.to_dict() for s in self.per_sample],
        }
        if self.scene_word_accuracy is not None:
            data["scene"] = {"word_accuracy": self.scene_word_accuracy, "samples": self.scene_samples}
        return data


def score_sample(sample_id: str, pred: str, gt: str) -> SampleResult:
    correct, detected, truth = word_prf(pred, gt)
    return SampleResult(sample_id, cer(pred, gt), word_accuracy_36(pred, gt), correct, detected, truth)


def evaluate_corpus(manifest: Sequence[ManifestEntry], predictions: Mapping[str, str],
                    scene: bool = False) -> EvalReport:
    """
    Score predictions against a manifest.

    Args:
        manifest: Ground-truth entries; the entry path is the sample id
        predictions: id -> predicted text; must cover every manifest id
        scene: Also report word accuracy over single-word samples

    Returns:
        EvalReport with per-sample rows in manifest order
    """
    missing = [entry.path for entry in manifest if entry.path not in predictions]
    if missing:
        raise EvaluationError(
            f"{len(missing)} manifest ids have no prediction: {', '.join(missing[:10])}",
            missing=missing,
        )
    samples = [score_sample(e.path, predictions[e.path], e.text) for e in manifest]
    flags = [len(e.text.split()) == 1 for e in manifest] if scene else []
    report = EvalReport.from_samples(samples, flags)
    logger.info(
        f"Evaluated {len(samples)} samples: F1 {report.f1:.4f}, CER {report.mean_cer:.4f}, "
        f"word accuracy {report.word_accuracy:.4f}"
    )
    return report
