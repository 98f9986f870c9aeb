# src/core/autodiff/ops.py
"""Differentiable primitives.

Each op computes its forward result with numpy and registers a backward
closure returning one gradient per input (``None`` for non-differentiable
inputs). Shapes follow numpy broadcasting; gradients of broadcast inputs are
summed back to the input's shape.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

from ...utils.errors import ConfigError, DimensionError, TokenIndexError
from .tensor import ArrayLike, Tensor, make_result

Operand = Union[Tensor, ArrayLike]

# Pre-softmax score for disallowed attention cells
MASK_VALUE = -1e9

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _lift(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value), dtype=dtype)


def _pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _lift(b, a)
    b_t = _lift(b)
    return _lift(a, b_t), b_t


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum grad over the axes that broadcasting expanded to reach shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# --- elementwise -----------------------------------------------------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(out, "add", (a, b), backward)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(out, "sub", (a, b), backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    out = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(out, "mul", (a, b), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x) with the erf form of the Gaussian CDF."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT_2))
    out = (x.data * cdf).astype(x.dtype, copy=False)

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return ((g * (cdf + x.data * pdf)).astype(x.dtype, copy=False),)

    return make_result(out, "gelu", (x,), backward)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], training: bool = True) -> Tensor:
    """Inverted dropout; identity when p == 0 or outside training."""
    if not training or p <= 0.0 or rng is None:
        return x
    if p >= 1.0:
        raise ConfigError(f"dropout probability must be < 1, got {p}")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    out = x.data * keep

    def backward(g):
        return (g * keep,)

    return make_result(out, "dropout", (x,), backward)


# --- shape ops -------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = x.data.reshape(tuple(shape))

    def backward(g):
        return (g.reshape(x.shape),)

    return make_result(out, "reshape", (x,), backward)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.transpose(x.data, axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return make_result(out, "transpose", (x,), backward)


def getitem(x: Tensor, index) -> Tensor:
    out = np.array(x.data[index], dtype=x.dtype, copy=True)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return make_result(out, "getitem", (x,), backward)


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = np.array(np.broadcast_to(x.data, shape))

    def backward(g):
        return (_unbroadcast(g, x.shape),)

    return make_result(out, "broadcast_to", (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(out, "concat", tensors, backward)


# --- reductions --------------------------------------------------------------

def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors Tensor.sum
    out = np.asarray(x.data.sum(), dtype=x.dtype)

    def backward(g):
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return make_result(out, "sum", (x,), backward)


def mean(x: Tensor) -> Tensor:
    count = max(x.size, 1)
    out = np.asarray(x.data.sum() / count, dtype=x.dtype)

    def backward(g):
        return ((np.broadcast_to(g, x.shape) / count).astype(x.dtype),)

    return make_result(out, "mean", (x,), backward)


# --- linear algebra ------------------------------------------------------------

def matmul(a: Operand, b: Operand) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul shape mismatch: {a.shape} x {b.shape}", left=a.shape, right=b.shape
        )
    out = np.matmul(a.data, b.data)

    def backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return make_result(out, "matmul", (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ weight + bias with weight stored as [in, out]."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"linear shape mismatch: {x.shape} x {weight.shape}", left=x.shape, right=weight.shape
        )
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        flat_g = g.reshape(-1, g.shape[-1])
        flat_x = x.data.reshape(-1, x.shape[-1])
        grads = [g @ weight.data.T, flat_x.T @ flat_g]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return tuple(grads)

    return make_result(out, "linear", inputs, backward)


# --- normalisation and probabilities -----------------------------------------

def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by max subtraction."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_result(out, "softmax", (x,), backward)


def log_softmax_array(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardisation over the last axis followed by an affine map."""
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise DimensionError(
            f"layer_norm parameters {gain.shape}/{bias.shape} do not match width {x.shape[-1]}"
        )
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be > 0, got {eps}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    out = x_hat * gain.data + bias.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        d_hat = g * gain.data
        dx = inv_std * (
            d_hat
            - d_hat.mean(axis=-1, keepdims=True)
            - x_hat * (d_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * x_hat).sum(axis=lead), g.sum(axis=lead)

    return make_result(out, "layer_norm", (x, gain, bias), backward)


# --- lookup ----------------------------------------------------------------------

def embedding_lookup(table: Tensor, ids: ArrayLike) -> Tensor:
    """Gather rows of table; backward scatter-adds into the table gradient."""
    index = np.asarray(ids, dtype=np.int64)
    vocab = table.shape[0]
    if index.size:
        bad = index[(index < 0) | (index >= vocab)]
        if bad.size:
            raise TokenIndexError(f"token id {int(bad[0])} out of range [0, {vocab})", token_id=int(bad[0]))
    out = table.data[index]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, index, g)
        return (full,)

    return make_result(out, "embedding_lookup", (table,), backward)


# --- attention ---------------------------------------------------------------------

def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    *lead, length, width = x.shape
    return np.swapaxes(x.reshape(*lead, length, heads, width // heads), -2, -3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    *lead, heads, length, dim = x.shape
    return np.swapaxes(x, -2, -3).reshape(*lead, length, heads * dim)


def attention(q: Tensor, k: Tensor, v: Tensor, heads: int,
              mask: Optional[np.ndarray] = None) -> Tensor:
    """Multi-head scaled dot-product attention with concatenated heads.

    q is [..., Tq, D]; k and v are [..., Tk, D] and may broadcast against q's
    leading axes. mask, when given, is a boolean array broadcastable to
    [..., Tq, Tk] where True marks an allowed cell. The output projection is
    applied by the calling layer.
    """
    width = q.shape[-1]
    if heads < 1 or width % heads != 0:
        raise ConfigError(f"hidden size {width} is not divisible by {heads} heads")
    if k.shape[-1] != width or v.shape[-1] != width or k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"attention shape mismatch: q{q.shape} k{k.shape} v{v.shape}")
    scale = 1.0 / np.sqrt(width // heads)

    qh = _split_heads(q.data, heads)
    kh = _split_heads(k.data, heads)
    vh = _split_heads(v.data, heads)
    scores = np.matmul(qh, np.swapaxes(kh, -1, -2)) * scale
    allow = None
    if mask is not None:
        allow = np.asarray(mask, dtype=bool)
        if allow.shape[-2:] != (q.shape[-2], k.shape[-2]):
            raise DimensionError(
                f"mask shape {allow.shape} does not match attention cells ({q.shape[-2]}, {k.shape[-2]})"
            )
        if allow.ndim > 2:
            # [..., Tq, Tk] -> [..., 1, Tq, Tk] to broadcast over heads
            allow = np.expand_dims(allow, -3)
        scores = np.where(allow, scores, MASK_VALUE)
    scores = scores - scores.max(axis=-1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=-1, keepdims=True)
    probs = probs.astype(q.dtype, copy=False)
    out = _merge_heads(np.matmul(probs, vh))

    def backward(g):
        gh = _split_heads(g, heads)
        d_probs = np.matmul(gh, np.swapaxes(vh, -1, -2))
        d_v = np.matmul(np.swapaxes(probs, -1, -2), gh)
        d_scores = probs * (d_probs - (d_probs * probs).sum(axis=-1, keepdims=True)) * scale
        d_q = np.matmul(d_scores, kh)
        d_k = np.matmul(np.swapaxes(d_scores, -1, -2), qh)
        return (
            _unbroadcast(_merge_heads(d_q), q.shape),
            _unbroadcast(_merge_heads(d_k), k.shape),
            _unbroadcast(_merge_heads(d_v), v.shape),
        )

    return make_result(out, "attention", (q, k, v), backward)


# --- loss ----------------------------------------------------------------------------

def cross_entropy(logits: Tensor, labels: ArrayLike, ignore_id: Optional[int] = None,
                  label_smoothing: float = 0.0) -> Tensor:
    """Mean token-level negative log-likelihood over non-ignored positions.

    Positions labelled ignore_id contribute neither loss nor gradient. When
    every position is ignored the loss is 0.0 with a zero gradient.
    """
    targets = np.asarray(labels, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(f"labels shape {targets.shape} does not match logits {logits.shape}")
    vocab = logits.shape[-1]
    keep = np.ones(targets.shape, dtype=bool) if ignore_id is None else targets != ignore_id
    count = int(keep.sum())
    if count:
        bad = targets[keep & ((targets < 0) | (targets >= vocab))]
        if bad.size:
            raise TokenIndexError(f"label {int(bad[0])} out of range [0, {vocab})", token_id=int(bad[0]))
    safe = np.where(keep, targets, 0)
    log_probs = log_softmax_array(logits.data)
    picked = np.take_along_axis(log_probs, safe[..., None], axis=-1)[..., 0]
    nll = -picked
    if label_smoothing > 0.0:
        nll = (1.0 - label_smoothing) * nll - label_smoothing * log_probs.mean(axis=-1)
    total = float((nll * keep).sum())
    out = np.asarray(total / count if count else 0.0, dtype=logits.dtype)

    def backward(g):
        if not count:
            return (np.zeros_like(logits.data),)
        target_dist = np.zeros_like(logits.data)
        np.put_along_axis(target_dist, safe[..., None], 1.0 - label_smoothing, axis=-1)
        if label_smoothing > 0.0:
            target_dist += label_smoothing / vocab
        grad = (np.exp(log_probs) - target_dist) * keep[..., None] * (float(g) / count)
        return (grad.astype(logits.dtype, copy=False),)

    return make_result(out, "cross_entropy", (logits,), backward)
