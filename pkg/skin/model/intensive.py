"""
SkIn - Intensive Reading (KSC)
Strong-encode the key window, fuse r = [r_l, r_g] and classify.
"""

from typing import Optional, Sequence

import numpy as np

from ..encoder import forward_encoder
from ..errors import ContractError, DimensionError, EmptyInputError
from ..ndtensor import Tensor, ops
from .inputs import position_masks, wrap_batch
from .params import SkinParams
from .selection import KeySegment
from .skim import SkimOutput


class IntensiveTrace:
    """
    Batched intensive pass.

    With `ablate_local` the local vector r_l is zero and the strong encoder
    is not run, so only r_g reaches the classifier.
    """

    def __init__(
        self,
        keys: Sequence[KeySegment],
        r_g: Tensor,
        params: SkinParams,
        train_mode: bool = False,
        rng: Optional[np.random.Generator] = None,
        ablate_local: bool = False,
    ):
        if not keys:
            raise EmptyInputError("no key segments to classify")
        if r_g.shape != (len(keys), params.d_g):
            raise DimensionError("intensive r_g", r_g.shape, (len(keys), params.d_g))
        widths = {len(key.span) for key in keys}
        if len(widths) != 1:
            raise ContractError(f"key spans of different widths in one batch: {sorted(widths)}")

        self.params = params
        self.ablate_local = ablate_local
        self.encoder = None
        if ablate_local:
            self.r_l = Tensor(np.zeros((len(keys), params.d_l)))
        else:
            wrapped = wrap_batch(np.stack([key.span for key in keys]))
            attn_keep, self.pool_keep = position_masks(wrapped, params.mask_padding)
            self.encoder = forward_encoder(wrapped, params.strong, train_mode, rng, attn_keep)
            self.r_l = ops.mean_pool(self.encoder.output, self.pool_keep)
        self.r = ops.concat(self.r_l, r_g)
        self.o = ops.row_softmax(ops.linear(self.r, params.w_o, params.b_o))

    def backward(self, d_o: np.ndarray) -> np.ndarray:
        """Accumulate W_o/b_o/strong-encoder grads; return d(loss)/d(r_g)."""
        params = self.params
        d_logits = ops.row_softmax_backward(d_o, self.o)
        dr, dw, db = ops.linear_backward(d_logits, self.r, params.w_o)
        params.w_o.accumulate_grad(dw)
        params.b_o.accumulate_grad(db)
        d_rl, d_rg = ops.concat_backward(dr, self.r_l)
        if self.encoder is not None:
            self.encoder.backward(
                ops.mean_pool_backward(d_rl, self.encoder.output, self.pool_keep)
            )
        return d_rg


def intensive_forward(
    key: KeySegment,
    skim: SkimOutput,
    params: SkinParams,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
    ablate_local: bool = False,
) -> Tensor:
    """Class probabilities o for one document."""
    r_g = Tensor(skim.r_g.data[None, :])
    trace = IntensiveTrace([key], r_g, params, train_mode, rng, ablate_local)
    return Tensor(trace.o.data[0])
