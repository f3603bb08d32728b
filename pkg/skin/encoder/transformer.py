"""
SkIn - Transformer Encoder
Post-norm multi-head self-attention blocks over learned token + position embeddings.

A forward pass returns an EncoderTrace holding the activations its backward
pass needs; `trace.backward(grad)` accumulates into the parameter grads.
"""

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..errors import ContractError, DimensionError, DomainError, EmptyInputError, SequenceLengthError
from ..ndtensor import Tensor, ops
from .config import EncoderConfig

INIT_STD = 0.02


class EncoderParams:
    """Named parameter tensors of one encoder."""

    def __init__(self, config: EncoderConfig, tensors: Dict[str, Tensor]):
        expected = self.expected_shapes(config)
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        if missing or extra:
            raise ContractError(
                f"encoder '{config.name}' parameters do not match its config "
                f"(missing: {missing[:3]}, unexpected: {extra[:3]})"
            )
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise DimensionError(f"encoder parameter {name}", shape, tensors[name].shape)
        self.config = config
        self.tensors = tensors

    @staticmethod
    def expected_shapes(config: EncoderConfig) -> Dict[str, Tuple[int, ...]]:
        d, ff = config.dim, config.ff_dim
        shapes: Dict[str, Tuple[int, ...]] = {
            "tok_emb.weight": (config.vocab_size, d),
            "pos_emb.weight": (config.max_len, d),
        }
        for i in range(config.layers):
            pre = f"layers.{i}."
            for proj in ("q", "k", "v", "o"):
                shapes[f"{pre}attn.{proj}.weight"] = (d, d)
                shapes[f"{pre}attn.{proj}.bias"] = (d,)
            shapes[f"{pre}ln1.gain"] = (d,)
            shapes[f"{pre}ln1.bias"] = (d,)
            shapes[f"{pre}ff1.weight"] = (ff, d)
            shapes[f"{pre}ff1.bias"] = (ff,)
            shapes[f"{pre}ff2.weight"] = (d, ff)
            shapes[f"{pre}ff2.bias"] = (d,)
            shapes[f"{pre}ln2.gain"] = (d,)
            shapes[f"{pre}ln2.bias"] = (d,)
        return shapes

    @classmethod
    def initialize(cls, config: EncoderConfig, rng: np.random.Generator) -> "EncoderParams":
        """Weights ~ N(0, 0.02); layer-norm gains 1; biases 0."""
        tensors: Dict[str, Tensor] = {}
        for name, shape in cls.expected_shapes(config).items():
            if name.endswith(".weight"):
                data = rng.normal(0.0, INIT_STD, size=shape)
            elif name.endswith(".gain"):
                data = np.ones(shape)
            else:
                data = np.zeros(shape)
            tensors[name] = Tensor(data, name=name)
        return cls(config, tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def named(self, prefix: str = "") -> Dict[str, Tensor]:
        return {prefix + name: t for name, t in self.tensors.items()}

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.config, {n: t.copy() for n, t in self.tensors.items()})


# =============================================================================
# Call instrumentation
# =============================================================================

@dataclass
class EncoderCall:
    """One encoder invocation: which encoder, how many sequences, how long."""
    encoder: str
    batch: int
    length: int


_RECORDERS: List[List[EncoderCall]] = []


@contextmanager
def record_encoder_calls() -> Iterator[List[EncoderCall]]:
    """Collect every forward_encoder call made inside the block."""
    calls: List[EncoderCall] = []
    _RECORDERS.append(calls)
    try:
        yield calls
    finally:
        _RECORDERS.pop()


# =============================================================================
# Forward / backward
# =============================================================================

class _Block:
    """One post-norm transformer block and its cached activations."""

    def __init__(
        self,
        params: EncoderParams,
        index: int,
        x: Tensor,
        p_drop: float,
        rng: Optional[np.random.Generator],
        attn_keep: Optional[np.ndarray],
    ):
        self.params = params
        self.prefix = f"layers.{index}."
        self.heads = params.config.heads
        self.scale = 1.0 / math.sqrt(params.config.head_dim)
        w = self._w

        self.x = x
        self.q = ops.linear(x, w("attn.q.weight"), w("attn.q.bias"))
        self.k = ops.linear(x, w("attn.k.weight"), w("attn.k.bias"))
        self.v = ops.linear(x, w("attn.v.weight"), w("attn.v.bias"))
        self.qh = ops.split_heads(self.q, self.heads)
        self.kh_t = Tensor(ops.split_heads(self.k, self.heads).data.transpose(0, 2, 1))
        self.vh = ops.split_heads(self.v, self.heads)

        scores = ops.scale(ops.batched_matmul(self.qh, self.kh_t), self.scale)
        self.attn = ops.row_softmax(scores, attn_keep)
        self.ctx_h = ops.batched_matmul(self.attn, self.vh)
        self.ctx = ops.merge_heads(self.ctx_h, self.heads)
        attn_out = ops.linear(self.ctx, w("attn.o.weight"), w("attn.o.bias"))
        attn_out, self.attn_mask = ops.dropout(attn_out, p_drop, rng)
        self.sum1 = ops.add(x, attn_out)
        self.h1 = ops.layer_norm(self.sum1, w("ln1.gain"), w("ln1.bias"))

        self.f1 = ops.linear(self.h1, w("ff1.weight"), w("ff1.bias"))
        self.r = ops.relu(self.f1)
        f2 = ops.linear(self.r, w("ff2.weight"), w("ff2.bias"))
        f2, self.ff_mask = ops.dropout(f2, p_drop, rng)
        self.sum2 = ops.add(self.h1, f2)
        self.output = ops.layer_norm(self.sum2, w("ln2.gain"), w("ln2.bias"))

    def _w(self, name: str) -> Tensor:
        return self.params[self.prefix + name]

    def _linear_back(self, grad: np.ndarray, x: Tensor, name: str) -> np.ndarray:
        weight = self._w(name + ".weight")
        dx, dweight, dbias = ops.linear_backward(grad, x, weight)
        weight.accumulate_grad(dweight)
        self._w(name + ".bias").accumulate_grad(dbias)
        return dx

    def _norm_back(self, grad: np.ndarray, x: Tensor, name: str) -> np.ndarray:
        dx, dgain, dbias = ops.layer_norm_backward(grad, x, self._w(name + ".gain"))
        self._w(name + ".gain").accumulate_grad(dgain)
        self._w(name + ".bias").accumulate_grad(dbias)
        return dx

    def backward(self, grad: np.ndarray) -> np.ndarray:
        dsum2 = self._norm_back(grad, self.sum2, "ln2")
        df2 = ops.dropout_backward(dsum2, self.ff_mask)
        dr = self._linear_back(df2, self.r, "ff2")
        df1 = ops.relu_backward(dr, self.f1)
        dh1 = dsum2 + self._linear_back(df1, self.h1, "ff1")

        dsum1 = self._norm_back(dh1, self.sum1, "ln1")
        dattn_out = ops.dropout_backward(dsum1, self.attn_mask)
        dctx = self._linear_back(dattn_out, self.ctx, "attn.o")
        dctx_h = ops.merge_heads_backward(dctx, self.ctx_h, self.heads)
        dattn, dvh = ops.batched_matmul_backward(dctx_h, self.attn, self.vh)
        dscores = ops.row_softmax_backward(dattn, self.attn) * self.scale
        dqh, dkh_t = ops.batched_matmul_backward(dscores, self.qh, self.kh_t)

        dq = ops.split_heads_backward(dqh, self.q, self.heads)
        dk = ops.split_heads_backward(dkh_t.transpose(0, 2, 1), self.k, self.heads)
        dv = ops.split_heads_backward(dvh, self.v, self.heads)
        return (
            dsum1
            + self._linear_back(dq, self.x, "attn.q")
            + self._linear_back(dk, self.x, "attn.k")
            + self._linear_back(dv, self.x, "attn.v")
        )


class EncoderTrace:
    """Activations of one batched encoder pass; `output` is [B×L×d]."""

    def __init__(
        self,
        params: EncoderParams,
        ids: np.ndarray,
        train_mode: bool,
        rng: Optional[np.random.Generator],
        keep: Optional[np.ndarray],
    ):
        config = params.config
        self.params = params
        self.ids = ids
        p_drop = config.dropout if train_mode else 0.0
        length = ids.shape[1]

        tokens = ops.embedding(params["tok_emb.weight"], ids)
        x = Tensor(tokens.data + params["pos_emb.weight"].data[:length])
        del tokens
        x, self._emb_mask = ops.dropout(x, p_drop, rng)

        attn_keep = None
        if keep is not None:
            keep = np.asarray(keep, dtype=bool)
            if keep.shape != ids.shape:
                raise DimensionError("encoder keep-mask", ids.shape, keep.shape)
            attn_keep = np.repeat(keep, config.heads, axis=0)[:, None, :]

        self.blocks: List[_Block] = []
        for i in range(config.layers):
            block = _Block(params, i, x, p_drop, rng, attn_keep)
            self.blocks.append(block)
            x = block.output
        self.output = x

    def backward(self, grad: np.ndarray) -> None:
        """Accumulate parameter gradients for d(loss)/d(output) = grad."""
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.output.shape:
            raise DimensionError("encoder backward", self.output.shape, grad.shape)
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        grad = ops.dropout_backward(grad, self._emb_mask)

        table = self.params["tok_emb.weight"]
        table.accumulate_grad(ops.embedding_backward(grad, self.ids, table))
        positions = self.params["pos_emb.weight"]
        dpos = np.zeros_like(positions.data)
        dpos[: self.ids.shape[1]] = grad.sum(axis=0)
        positions.accumulate_grad(dpos)


def forward_encoder(
    ids,
    params: EncoderParams,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
    keep: Optional[np.ndarray] = None,
) -> EncoderTrace:
    """
    Encode a batch of equal-length id sequences.

    Args:
        ids: Integer array [B×L].
        params: Encoder parameters.
        train_mode: Enables dropout (requires `rng`).
        rng: Source of dropout masks.
        keep: Optional [B×L] booleans; False keys receive zero attention.

    Returns:
        EncoderTrace whose `output` is [B×L×d].
    """
    config = params.config
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2:
        raise ContractError(f"forward_encoder expects a [B×L] id batch, got shape {ids.shape}")
    if ids.shape[1] == 0:
        raise EmptyInputError("cannot encode an empty sequence")
    if ids.shape[1] > config.max_len:
        raise SequenceLengthError(
            f"encoder '{config.name}': input length {ids.shape[1]} exceeds max_len {config.max_len}"
        )
    if train_mode and rng is None and config.dropout > 0.0:
        raise ContractError("train_mode requires an rng for dropout")
    for calls in _RECORDERS:
        calls.append(EncoderCall(config.name, ids.shape[0], ids.shape[1]))
    return EncoderTrace(params, ids, train_mode, rng, keep)


def encode(
    ids,
    params: EncoderParams,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Encode one id sequence to an [L×d] tensor."""
    trace = forward_encoder(np.asarray(ids, dtype=np.int64)[None, :], params, train_mode, rng)
    return Tensor(trace.output.data[0])


def pool(enc: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
    """Average pooling over positions."""
    return ops.mean_pool(enc, keep)


@dataclass(frozen=True)
class AttentionCost:
    """Modeled elements: attention scores (N·h·L²) and activations (N·d·L)."""
    quadratic: int
    linear: int


def attention_cost(config: EncoderConfig, length: int) -> AttentionCost:
    if length < 1:
        raise DomainError(f"attention_cost needs L >= 1, got {length}")
    return AttentionCost(
        quadratic=config.layers * config.heads * length * length,
        linear=config.layers * config.dim * length,
    )
