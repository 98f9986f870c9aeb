# src/core/autodiff/tensor.py
"""Define-by-run reverse-mode tensors.

Every differentiable op records a Node holding its inputs and a backward
closure. ``Tensor.backward`` collects the reachable nodes into a Graph,
replays them once in reverse execution order and then releases them, so a
second backward over the same graph is a usage error instead of a silent
double accumulation.
"""

import itertools
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ...utils.errors import NumericalError, UsageError

ArrayLike = Union[np.ndarray, float, int, Sequence]

SUPPORTED_DTYPES = {"float32": np.float32, "float64": np.float64}

_sequence = itertools.count()
_state = threading.local()
_debug_checks = os.getenv("DESK_TROCR_DEBUG", "0") == "1"


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording on the current thread."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def set_debug_checks(enabled: bool) -> None:
    """Toggle the finite-output check run after every forward op."""
    global _debug_checks
    _debug_checks = enabled


def debug_checks_enabled() -> bool:
    return _debug_checks


def resolve_dtype(dtype: Union[str, np.dtype, type]) -> np.dtype:
    if isinstance(dtype, str):
        if dtype not in SUPPORTED_DTYPES:
            raise ValueError(f"unsupported dtype {dtype!r}; expected one of {sorted(SUPPORTED_DTYPES)}")
        return np.dtype(SUPPORTED_DTYPES[dtype])
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {resolved}")
    return resolved


@dataclass(eq=False)
class Node:
    """One executed op on the tape."""
    op: str
    inputs: Tuple["Tensor", ...]
    backward_fn: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]]
    output_id: int = -1
    seq: int = field(default_factory=lambda: next(_sequence))
    released: bool = False

    def release(self) -> None:
        # Drops saved activations held by the closure
        self.backward_fn = None
        self.released = True


@dataclass
class Graph:
    """Ordered record of the nodes reachable from one output."""
    nodes: List[Node]

    @classmethod
    def from_output(cls, output: "Tensor") -> "Graph":
        seen: Dict[int, Node] = {}
        stack = [output]
        while stack:
            tensor = stack.pop()
            node = tensor._node
            if node is None or id(node) in seen:
                continue
            if node.released:
                raise UsageError(
                    f"backward() through op '{node.op}' whose graph was already consumed; "
                    "run a new forward pass first"
                )
            seen[id(node)] = node
            stack.extend(node.inputs)
        # Execution order is a valid topological order
        return cls(nodes=sorted(seen.values(), key=lambda n: n.seq))

    def backward(self, output: "Tensor", seed_grad: np.ndarray) -> None:
        grads: Dict[int, np.ndarray] = {id(output): seed_grad}
        for node in reversed(self.nodes):
            upstream = grads.pop(node.output_id, None)
            if upstream is not None and node.backward_fn is not None:
                input_grads = node.backward_fn(upstream)
                for tensor, grad in zip(node.inputs, input_grads):
                    if grad is None or not tensor.requires_grad:
                        continue
                    if tensor._node is None:
                        tensor._accumulate(grad)
                    else:
                        key = id(tensor)
                        grads[key] = grads[key] + grad if key in grads else grad
            node.release()


class Tensor:
    """Dense float array with optional gradient."""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False,
                 dtype: Union[str, np.dtype, type, None] = None, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        target = resolve_dtype(dtype) if dtype is not None else None
        array = np.asarray(data)
        if target is None:
            target = array.dtype if array.dtype in (np.float32, np.float64) else np.dtype(np.float64)
        self.data: np.ndarray = np.ascontiguousarray(array, dtype=target)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional[Node] = None

    # --- introspection -------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    def __len__(self) -> int:
        return self.shape[0]

    # --- gradient handling ---------------------------------------------
    def _accumulate(self, grad: np.ndarray) -> None:
        grad = np.asarray(grad, dtype=self.dtype)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        """Propagate gradients to every leaf reachable from this tensor."""
        if not self.requires_grad:
            raise UsageError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.size != 1:
                raise UsageError(f"backward() without a gradient needs a scalar, got shape {self.shape}")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(grad, dtype=self.dtype).reshape(self.shape)
        if self._node is None:
            self._accumulate(seed)
            return
        Graph.from_output(self).backward(self, seed)

    # --- operator sugar --------------------------------------------------
    def __add__(self, other): return _ops().add(self, other)
    def __radd__(self, other): return _ops().add(other, self)
    def __sub__(self, other): return _ops().sub(self, other)
    def __rsub__(self, other): return _ops().sub(other, self)
    def __mul__(self, other): return _ops().mul(self, other)
    def __rmul__(self, other): return _ops().mul(other, self)
    def __neg__(self): return _ops().mul(self, -1.0)
    def __matmul__(self, other): return _ops().matmul(self, other)
    def __getitem__(self, index): return _ops().getitem(self, index)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops().reshape(self, shape)

    def sum(self) -> "Tensor":
        return _ops().sum(self)

    def mean(self) -> "Tensor":
        return _ops().mean(self)


def as_tensor(value: Union["Tensor", ArrayLike], dtype: Optional[np.dtype] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def make_result(data: np.ndarray, op: str, inputs: Sequence[Tensor],
                backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    """Wrap an op's output and record it on the tape when needed."""
    if _debug_checks and not np.all(np.isfinite(data)):
        finite_inputs = all(np.all(np.isfinite(t.data)) for t in inputs)
        if finite_inputs:
            raise NumericalError(f"op '{op}' produced non-finite values from finite inputs", op=op)
    needs_grad = grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        out._node = Node(op=op, inputs=tuple(inputs), backward_fn=backward_fn, output_id=id(out))
    return out


def _ops():
    from . import ops
    return ops
