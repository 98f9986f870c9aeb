# src/core/model/layers.py
"""Parameter containers and the Transformer building blocks."""

from collections import OrderedDict
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.stats import truncnorm

from ..autodiff import ops
from ..autodiff.tensor import Tensor

INIT_STD = 0.02


def trunc_normal(shape: Tuple[int, ...], rng: np.random.Generator, dtype: np.dtype,
                 std: float = INIT_STD) -> np.ndarray:
    """Normal(0, std) truncated at two standard deviations."""
    values = truncnorm.rvs(-2.0, 2.0, loc=0.0, scale=std, size=shape, random_state=rng)
    return np.asarray(values, dtype=dtype).reshape(shape)


class Module:
    """Tree of named parameters; attributes holding Tensors or Modules are registered."""

    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "training", False)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._parameters.items():
            yield prefix + name, tensor
        for name, module in self._modules.items():
            yield from module.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for module in self._modules.values():
            yield from module.modules()

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            object.__setattr__(module, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def reset_parameters(self, rng: np.random.Generator) -> None:
        """Re-draw this module's own parameters; children handle theirs."""


class ModuleList(Module):
    def __init__(self, modules: Optional[List[Module]] = None):
        super().__init__()
        self._items: List[Module] = []
        for module in modules or []:
            self.append(module)

    def append(self, module: Module) -> None:
        self._modules[str(len(self._items))] = module
        self._items.append(module)

    def __iter__(self) -> Iterator[Module]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Module:
        return self._items[index]


class Linear(Module):
    """y = x W + b with W stored as [in, out]."""

    def __init__(self, fan_in: int, fan_out: int, dtype: np.dtype):
        super().__init__()
        self.weight = Tensor(np.zeros((fan_in, fan_out)), requires_grad=True, dtype=dtype)
        self.bias = Tensor(np.zeros(fan_out), requires_grad=True, dtype=dtype)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        self.weight.data[...] = trunc_normal(self.weight.shape, rng, self.weight.dtype)
        self.bias.data[...] = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, width: int, dtype: np.dtype, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gain = Tensor(np.ones(width), requires_grad=True, dtype=dtype)
        self.bias = Tensor(np.zeros(width), requires_grad=True, dtype=dtype)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        self.gain.data[...] = 1.0
        self.bias.data[...] = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class MultiHeadAttention(Module):
    """Scaled dot-product attention with separate q/k/v/output projections.

    Keys and values may come from a stream of a different width (the encoder
    memory in cross-attention); they are projected to the query width.
    """

    def __init__(self, width: int, heads: int, dtype: np.dtype, memory_width: Optional[int] = None):
        super().__init__()
        memory_width = memory_width or width
        self.heads = heads
        self.q_proj = Linear(width, width, dtype)
        self.k_proj = Linear(memory_width, width, dtype)
        self.v_proj = Linear(memory_width, width, dtype)
        self.out_proj = Linear(width, width, dtype)

    def project_memory(self, memory: Tensor) -> Tuple[Tensor, Tensor]:
        return self.k_proj(memory), self.v_proj(memory)

    def attend(self, x: Tensor, keys: Tensor, values: Tensor,
               mask: Optional[np.ndarray] = None) -> Tensor:
        context = ops.attention(self.q_proj(x), keys, values, self.heads, mask)
        return self.out_proj(context)

    def __call__(self, x: Tensor, memory: Optional[Tensor] = None,
                 mask: Optional[np.ndarray] = None) -> Tensor:
        keys, values = self.project_memory(x if memory is None else memory)
        return self.attend(x, keys, values, mask)


class FeedForward(Module):
    def __init__(self, width: int, ratio: int, dtype: np.dtype, dropout: float = 0.0):
        super().__init__()
        self.dropout = dropout
        self.fc1 = Linear(width, ratio * width, dtype)
        self.fc2 = Linear(ratio * width, width, dtype)

    def __call__(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        hidden = ops.dropout(ops.gelu(self.fc1(x)), self.dropout, rng, self.training)
        return self.fc2(hidden)


def reset_all(module: Module, rng: np.random.Generator) -> None:
    """Initialise a module tree in registration order from one generator."""
    for child in module.modules():
        child.reset_parameters(rng)
