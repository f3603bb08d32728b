"""
SkIn - Tensor Operations
Forward functions return new Tensors; each has a matching `*_backward`
that maps the upstream gradient to gradients of its inputs.

Models compose these explicitly: a forward pass keeps what its backward
needs and calls the backward functions in reverse order.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractError, DimensionError, EmptyInputError, VocabError
from .tensor import Tensor

LOG_CLAMP = 1e-12
LAYER_NORM_EPS = 1e-5


# =============================================================================
# Products
# =============================================================================

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard 2-D matrix product a[m×k] · b[k×n]."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)
    return Tensor(a.data @ b.data)


def matmul_backward(grad: np.ndarray, a: Tensor, b: Tensor) -> Tuple[np.ndarray, np.ndarray]:
    """dA = dC·Bᵀ, dB = Aᵀ·dC."""
    return grad @ b.data.T, a.data.T @ grad


def batched_matmul(a: Tensor, b: Tensor) -> Tensor:
    """Product of matching batches: a[B×m×k] · b[B×k×n] -> [B×m×n]."""
    if (a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0]
            or a.shape[2] != b.shape[1]):
        raise DimensionError("batched_matmul", a.shape, b.shape)
    return Tensor(np.matmul(a.data, b.data))


def batched_matmul_backward(
    grad: np.ndarray, a: Tensor, b: Tensor
) -> Tuple[np.ndarray, np.ndarray]:
    return (
        np.matmul(grad, b.data.transpose(0, 2, 1)),
        np.matmul(a.data.transpose(0, 2, 1), grad),
    )


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Dense layer y = x·Wᵀ + b.

    Args:
        x: Input of shape [..., in].
        weight: Weight matrix [out×in].
        bias: Optional bias [out].

    Returns:
        Tensor of shape [..., out].
    """
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise DimensionError("linear", x.shape, weight.shape)
    out = x.data @ weight.data.T
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise DimensionError("linear bias", weight.shape, bias.shape)
        out = out + bias.data
    return Tensor(out)


def linear_backward(
    grad: np.ndarray, x: Tensor, weight: Tensor
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dW, db); db is meaningful only when a bias was used."""
    n_out, n_in = weight.shape
    dx = grad @ weight.data
    flat_grad = grad.reshape(-1, n_out)
    flat_x = x.data.reshape(-1, n_in)
    return dx, flat_grad.T @ flat_x, flat_grad.sum(axis=0)


# =============================================================================
# Elementwise and shape plumbing
# =============================================================================

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError("add", a.shape, b.shape)
    return Tensor(a.data + b.data)


def scale(x: Tensor, factor: float) -> Tensor:
    return Tensor(x.data * factor)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        return Tensor(x.data.reshape(tuple(shape)))
    except ValueError:
        raise DimensionError("reshape", x.shape, tuple(shape))


def reshape_backward(grad: np.ndarray, x: Tensor) -> np.ndarray:
    return grad.reshape(x.shape)


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0.0))


def relu_backward(grad: np.ndarray, x: Tensor) -> np.ndarray:
    return grad * (x.data > 0.0)


def dropout(
    x: Tensor, p: float, rng: Optional[np.random.Generator]
) -> Tuple[Tensor, Optional[np.ndarray]]:
    """
    Inverted dropout. Returns the output and the scaled keep-mask
    (None when nothing was dropped).
    """
    if p <= 0.0 or rng is None:
        return x, None
    if p >= 1.0:
        raise ContractError(f"dropout probability must be < 1, got {p}")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return Tensor(x.data * mask), mask


def dropout_backward(grad: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return grad if mask is None else grad * mask


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis."""
    if a.shape[:-1] != b.shape[:-1]:
        raise DimensionError("concat", a.shape, b.shape)
    return Tensor(np.concatenate([a.data, b.data], axis=-1))


def concat_backward(grad: np.ndarray, a: Tensor) -> Tuple[np.ndarray, np.ndarray]:
    split = a.shape[-1]
    return grad[..., :split], grad[..., split:]


def split_heads(x: Tensor, heads: int) -> Tensor:
    """[B×L×d] -> [(B·h)×L×(d/h)]."""
    batch, length, dim = x.shape
    if dim % heads != 0:
        raise DimensionError("split_heads", x.shape, (heads,))
    head_dim = dim // heads
    out = x.data.reshape(batch, length, heads, head_dim).transpose(0, 2, 1, 3)
    return Tensor(out.reshape(batch * heads, length, head_dim))


def split_heads_backward(grad: np.ndarray, x: Tensor, heads: int) -> np.ndarray:
    batch, length, dim = x.shape
    head_dim = dim // heads
    out = grad.reshape(batch, heads, length, head_dim).transpose(0, 2, 1, 3)
    return out.reshape(batch, length, dim)


def merge_heads(x: Tensor, heads: int) -> Tensor:
    """[(B·h)×L×dh] -> [B×L×(h·dh)]."""
    bh, length, head_dim = x.shape
    batch = bh // heads
    out = x.data.reshape(batch, heads, length, head_dim).transpose(0, 2, 1, 3)
    return Tensor(out.reshape(batch, length, heads * head_dim))


def merge_heads_backward(grad: np.ndarray, x: Tensor, heads: int) -> np.ndarray:
    bh, length, head_dim = x.shape
    batch = bh // heads
    out = grad.reshape(batch, length, heads, head_dim).transpose(0, 2, 1, 3)
    return out.reshape(bh, length, head_dim)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup table[ids]; output shape ids.shape + (d,)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        bad = int(ids.max()) if ids.max() >= table.shape[0] else int(ids.min())
        raise VocabError(f"token id {bad} outside vocabulary of size {table.shape[0]}")
    return Tensor(table.data[ids])


def embedding_backward(grad: np.ndarray, ids: np.ndarray, table: Tensor) -> np.ndarray:
    dtable = np.zeros_like(table.data)
    np.add.at(dtable, np.asarray(ids, dtype=np.int64), grad)
    return dtable


# =============================================================================
# Normalizations
# =============================================================================

def row_softmax(x: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax over the last axis with max-subtraction.

    Args:
        x: Logits of any shape; rows are along the last axis.
        keep: Optional boolean mask broadcastable to x; dropped entries get
            probability exactly 0. Every row must keep at least one entry.
    """
    data = x.data
    if keep is None:
        shifted = data - data.max(axis=-1, keepdims=True)
        exps = np.exp(shifted)
    else:
        keep = np.broadcast_to(keep, data.shape)
        row_max = np.where(keep, data, -np.inf).max(axis=-1, keepdims=True)
        exps = np.exp(np.where(keep, data - row_max, -np.inf))
    return Tensor(exps / exps.sum(axis=-1, keepdims=True))


def row_softmax_backward(grad: np.ndarray, y: Tensor) -> np.ndarray:
    """Softmax Jacobian-vector product using the forward output y."""
    probs = y.data
    return probs * (grad - (grad * probs).sum(axis=-1, keepdims=True))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each row (last axis) to mean 0 / variance 1, then scale and shift."""
    if x.shape[-1] != gain.shape[-1] or gain.shape != bias.shape:
        raise DimensionError("layer_norm", x.shape, gain.shape, bias.shape)
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    normed = (x.data - mean) / np.sqrt(var + eps)
    return Tensor(normed * gain.data + bias.data)


def layer_norm_backward(
    grad: np.ndarray, x: Tensor, gain: Tensor, eps: float = LAYER_NORM_EPS
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgain, dbias)."""
    dim = x.shape[-1]
    mean = x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.data.var(axis=-1, keepdims=True) + eps)
    normed = (x.data - mean) * inv_std
    dnormed = grad * gain.data
    dx = (inv_std / dim) * (
        dim * dnormed
        - dnormed.sum(axis=-1, keepdims=True)
        - normed * (dnormed * normed).sum(axis=-1, keepdims=True)
    )
    flat_grad = grad.reshape(-1, dim)
    dgain = (flat_grad * normed.reshape(-1, dim)).sum(axis=0)
    return dx, dgain, flat_grad.sum(axis=0)


# =============================================================================
# Pooling
# =============================================================================

def _pool_counts(x: Tensor, keep: Optional[np.ndarray]) -> np.ndarray:
    if x.ndim < 2 or x.shape[-2] == 0:
        raise EmptyInputError(f"pooling needs at least one row, got shape {x.shape}")
    if keep is None:
        return np.full(x.shape[:-2] + (1,), float(x.shape[-2]))
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != x.shape[:-1]:
        raise DimensionError("pool keep-mask", x.shape, keep.shape)
    counts = keep.sum(axis=-1, keepdims=True).astype(np.float64)
    if np.any(counts == 0):
        raise EmptyInputError("pooling mask keeps no rows")
    return counts


def mean_pool(x: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
    """
    Arithmetic mean over the row axis: [..., L, d] -> [..., d].

    With `keep` ([..., L] booleans) only kept rows are averaged.
    """
    counts = _pool_counts(x, keep)
    if keep is None:
        return Tensor(x.data.sum(axis=-2) / counts)
    weights = np.asarray(keep, dtype=np.float64)[..., None]
    return Tensor((x.data * weights).sum(axis=-2) / counts)


def mean_pool_backward(
    grad: np.ndarray, x: Tensor, keep: Optional[np.ndarray] = None
) -> np.ndarray:
    counts = _pool_counts(x, keep)
    spread = np.broadcast_to((grad / counts)[..., None, :], x.shape)
    if keep is None:
        return spread.copy()
    return spread * np.asarray(keep, dtype=np.float64)[..., None]


def _max_indices(x: Tensor, keep: Optional[np.ndarray]) -> np.ndarray:
    _pool_counts(x, keep)
    data = x.data
    if keep is not None:
        data = np.where(np.asarray(keep, dtype=bool)[..., None], data, -np.inf)
    return data.argmax(axis=-2)


def max_pool(x: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
    """Column-wise maximum over the row axis: [..., L, d] -> [..., d]."""
    idx = _max_indices(x, keep)
    return Tensor(np.take_along_axis(x.data, idx[..., None, :], axis=-2)[..., 0, :])


def max_pool_backward(
    grad: np.ndarray, x: Tensor, keep: Optional[np.ndarray] = None
) -> np.ndarray:
    idx = _max_indices(x, keep)
    dx = np.zeros_like(x.data)
    np.put_along_axis(dx, idx[..., None, :], grad[..., None, :], axis=-2)
    return dx


# =============================================================================
# Attention primitive (K serves as query, key and value)
# =============================================================================

def self_attention(k: Tensor) -> Tensor:
    """Single-head softmax(K·Kᵀ/√d_k)·K."""
    if k.ndim != 2 or k.shape[0] == 0:
        raise EmptyInputError(f"self_attention needs an L×d_k matrix with L >= 1, got {k.shape}")
    scores = scale(matmul(k, Tensor(k.data.T)), 1.0 / math.sqrt(k.shape[1]))
    return matmul(row_softmax(scores), k)


def self_attention_backward(grad: np.ndarray, k: Tensor) -> np.ndarray:
    root = math.sqrt(k.shape[1])
    weights = row_softmax(Tensor(k.data @ k.data.T / root)).data
    dweights = grad @ k.data.T
    dk = weights.T @ grad
    dscores = weights * (dweights - (dweights * weights).sum(axis=-1, keepdims=True))
    return dk + (dscores + dscores.T) @ k.data / root


# =============================================================================
# Loss
# =============================================================================

def _check_distribution(pred: Tensor, target: Tensor) -> None:
    if pred.shape != target.shape or pred.ndim not in (1, 2):
        raise DimensionError("cross_entropy", pred.shape, target.shape)
    sums = pred.data.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ContractError("cross_entropy predictions must sum to 1 per row")
    if np.any(target.data < 0.0):
        raise ContractError("cross_entropy targets must be non-negative")


def cross_entropy(pred: Tensor, target: Tensor) -> float:
    """
    -Σ t·ln(clamp(p, 1e-12, 1)); averaged over rows when 2-D.

    Targets need not sum to 1 (the literal label-smoothing rule produces
    unnormalized targets).
    """
    _check_distribution(pred, target)
    clamped = np.clip(pred.data, LOG_CLAMP, 1.0)
    per_row = -(target.data * np.log(clamped)).sum(axis=-1)
    return float(per_row.mean()) if pred.ndim == 2 else float(per_row)


def cross_entropy_backward(pred: Tensor, target: Tensor) -> np.ndarray:
    """Gradient of `cross_entropy` w.r.t. the predicted probabilities."""
    clamped = np.clip(pred.data, LOG_CLAMP, 1.0)
    grad = -target.data / clamped * (pred.data >= LOG_CLAMP)
    if pred.ndim == 2:
        grad = grad / pred.shape[0]
    return grad
