"""Reverse-mode automatic differentiation over numpy arrays."""

from . import ops
from .gradcheck import check_gradients, numeric_gradient, relative_error
from .tensor import (
    Graph,
    Node,
    Tensor,
    as_tensor,
    debug_checks_enabled,
    grad_enabled,
    no_grad,
    resolve_dtype,
    set_debug_checks,
)

__all__ = [
    "ops",
    "Tensor",
    "Graph",
    "Node",
    "as_tensor",
    "no_grad",
    "grad_enabled",
    "set_debug_checks",
    "debug_checks_enabled",
    "resolve_dtype",
    "check_gradients",
    "numeric_gradient",
    "relative_error",
]
