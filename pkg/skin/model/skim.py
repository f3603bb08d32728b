"""
SkIn - Skimming (PrC-SaA)
Lite-encode every segment, score segments with self-adaptive attention,
form the global vector and the previous-classification probabilities.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..encoder import forward_encoder
from ..errors import ContractError, EmptyInputError
from ..ndtensor import Tensor, ops
from ..textio import SegmentedDoc
from .inputs import position_masks, wrap_batch
from .params import SkinParams


@dataclass
class SkimOutput:
    """Skim results for one document."""
    p: Tensor       # [n×d_g]
    g: Tensor       # [n]
    r_g: Tensor     # [d_g]
    o_pre: Tensor   # [U]


def saa_logits(p: Tensor, w_a: Tensor) -> Tensor:
    """W_a·pᵀ/√d_g for p of shape [..., n, d_g]; returns [..., n]."""
    scores = ops.linear(p, w_a)
    return Tensor(scores.data[..., 0] / math.sqrt(p.shape[-1]))


def saa_weights(p: Tensor, w_a: Tensor) -> Tensor:
    """Segment weights g = softmax(W_a·pᵀ/√d_g)."""
    return ops.row_softmax(saa_logits(p, w_a))


def global_vector(g: Tensor, p: Tensor) -> Tensor:
    """r_g = g·p, i.e. the g-weighted sum of segment encodings."""
    return Tensor(np.einsum("...n,...nd->...d", g.data, p.data))


def _common_geometry(docs: Sequence[SegmentedDoc]):
    if not docs:
        raise EmptyInputError("no documents to skim")
    n, l = docs[0].n, docs[0].l
    for doc in docs:
        if (doc.n, doc.l) != (n, l):
            raise ContractError(
                f"batch mixes segment geometries ({n}×{l} and {doc.n}×{doc.l})"
            )
    return n, l


class SkimTrace:
    """Batched skim pass over B documents with the state its backward needs."""

    def __init__(
        self,
        docs: Sequence[SegmentedDoc],
        params: SkinParams,
        train_mode: bool = False,
        rng: Optional[np.random.Generator] = None,
    ):
        n, l = _common_geometry(docs)
        batch = len(docs)
        self.params = params
        self.batch, self.n = batch, n

        grid = np.stack([doc.segments() for doc in docs]).reshape(batch * n, l)
        wrapped = wrap_batch(grid)
        attn_keep, self.pool_keep = position_masks(wrapped, params.mask_padding)
        self.encoder = forward_encoder(wrapped, params.lite, train_mode, rng, attn_keep)

        pooled = ops.mean_pool(self.encoder.output, self.pool_keep)
        self.p = ops.reshape(pooled, (batch, n, params.d_g))
        self.g = saa_weights(self.p, params.w_a)
        self.r_g = global_vector(self.g, self.p)
        self.o_pre = ops.row_softmax(ops.linear(self.r_g, params.w_op, params.b_op))

    def outputs(self) -> List[SkimOutput]:
        return [
            SkimOutput(
                p=Tensor(self.p.data[b]),
                g=Tensor(self.g.data[b]),
                r_g=Tensor(self.r_g.data[b]),
                o_pre=Tensor(self.o_pre.data[b]),
            )
            for b in range(self.batch)
        ]

    def backward(
        self,
        d_o_pre: Optional[np.ndarray] = None,
        d_r_g: Optional[np.ndarray] = None,
    ) -> None:
        """
        Accumulate gradients from d(loss)/d(o_pre) and/or d(loss)/d(r_g).

        W_op and b_op only receive gradient through `d_o_pre`.
        """
        params = self.params
        grad_rg = np.zeros_like(self.r_g.data)
        if d_o_pre is not None:
            d_logits = ops.row_softmax_backward(d_o_pre, self.o_pre)
            drg, dw, db = ops.linear_backward(d_logits, self.r_g, params.w_op)
            params.w_op.accumulate_grad(dw)
            params.b_op.accumulate_grad(db)
            grad_rg += drg
        if d_r_g is not None:
            grad_rg += d_r_g

        p, g = self.p.data, self.g.data
        dg = np.einsum("bd,bnd->bn", grad_rg, p)
        dp = g[:, :, None] * grad_rg[:, None, :]
        dscores = ops.row_softmax_backward(dg, self.g) / math.sqrt(params.d_g)
        dp_scores, dw_a, _ = ops.linear_backward(dscores[..., None], self.p, params.w_a)
        params.w_a.accumulate_grad(dw_a)
        dp += dp_scores

        dpooled = dp.reshape(self.batch * self.n, params.d_g)
        self.encoder.backward(
            ops.mean_pool_backward(dpooled, self.encoder.output, self.pool_keep)
        )


def skim_forward(
    doc: SegmentedDoc,
    params: SkinParams,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> SkimOutput:
    """Skim a single document."""
    return SkimTrace([doc], params, train_mode, rng).outputs()[0]
