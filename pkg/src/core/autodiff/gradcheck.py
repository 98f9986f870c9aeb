# src/core/autodiff/gradcheck.py
"""Central finite-difference gradient checking."""

from typing import Callable, Dict, Sequence

import numpy as np

from .tensor import Tensor, no_grad

DEFAULT_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-relative error, safe when both gradients vanish."""
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(diff / scale)


def numeric_gradient(fn: Callable[[], Tensor], tensor: Tensor, step: float = DEFAULT_STEP) -> np.ndarray:
    """Estimate d fn() / d tensor by perturbing one element at a time."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out_grad = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = fn().item()
            flat[i] = original - step
            minus = fn().item()
            flat[i] = original
            out_grad[i] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor],
                    step: float = DEFAULT_STEP) -> Dict[int, float]:
    """
    Compare backward() against central differences.

    Args:
        fn: Closure that rebuilds the scalar output from the inputs
        inputs: Tensors whose gradients are checked; they must be float64
        step: Finite-difference step

    Returns:
        Map from input position to relative error
    """
    for tensor in inputs:
        if tensor.dtype != np.float64:
            raise ValueError("gradient checks need float64 tensors")
        tensor.requires_grad = True
        tensor.zero_grad()
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    return {
        i: relative_error(analytic[i], numeric_gradient(fn, tensor, step))
        for i, tensor in enumerate(inputs)
    }


def weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Reduce a tensor to a scalar with fixed random weights for checking."""
    return (out * weights).sum()
