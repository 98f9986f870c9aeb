"""Optimizer and teacher-forced training loop."""

from .optimizer import Adam, OptimState, clip_grad_norm, global_grad_norm
from .trainer import (
    TrainingConfig,
    TrainingPair,
    TrainingResult,
    batch_loss,
    collate,
    evaluate_cer,
    make_training_pair,
    run_training,
    train_step,
)

__all__ = [
    "Adam",
    "OptimState",
    "clip_grad_norm",
    "global_grad_norm",
    "TrainingConfig",
    "TrainingPair",
    "TrainingResult",
    "batch_loss",
    "collate",
    "evaluate_cer",
    "make_training_pair",
    "run_training",
    "train_step",
]
