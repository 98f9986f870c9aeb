# src/core/training/optimizer.py
"""Adam with linear warmup, and global-norm gradient clipping."""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..autodiff.tensor import Tensor


@dataclass
class OptimState:
    """First/second moments per parameter name, mirroring parameter shapes."""
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


class Adam:
    def __init__(self, named_params: Sequence[Tuple[str, Tensor]], lr: float = 1e-4,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 warmup_steps: int = 0):
        self.params: List[Tuple[str, Tensor]] = list(named_params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.warmup_steps = max(0, int(warmup_steps))
        self.state = OptimState(
            first_moment={name: np.zeros_like(p.data) for name, p in self.params},
            second_moment={name: np.zeros_like(p.data) for name, p in self.params},
        )

    def current_lr(self, step: int) -> float:
        """Learning rate for 1-based step: linear ramp over the warmup, constant after."""
        if self.warmup_steps and step <= self.warmup_steps:
            return self.lr * step / self.warmup_steps
        return self.lr

    def step(self) -> float:
        """Apply one update from the parameters' .grad; returns the learning rate used."""
        self.state.step += 1
        t = self.state.step
        lr = self.current_lr(t)
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for name, param in self.params:
            if param.grad is None:
                continue
            grad = param.grad
            m = self.state.first_moment[name]
            v = self.state.second_moment[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            if lr != 0.0:
                param.data -= (lr * update).astype(param.dtype, copy=False)
        return lr

    def zero_grad(self) -> None:
        for _, param in self.params:
            param.zero_grad()


def global_grad_norm(params: Sequence[Tensor]) -> float:
    total = 0.0
    for param in params:
        if param.grad is not None:
            total += float(np.sum(np.square(param.grad, dtype=np.float64)))
    return float(np.sqrt(total))


def max_abs_grad(params: Sequence[Tensor]) -> float:
    values = [float(np.max(np.abs(p.grad))) for p in params if p.grad is not None and p.grad.size]
    return max(values) if values else 0.0


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm; returns the pre-clip norm."""
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for param in params:
            if param.grad is not None:
                param.grad *= scale
    return norm
