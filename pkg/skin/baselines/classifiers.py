"""
SkIn - Baseline Classifiers
Truncation, head+tail and sliding-window classification with the Strong encoder.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..encoder import EncoderConfig, EncoderParams, forward_encoder, load_checkpoint, save_checkpoint
from ..errors import CheckpointError, ContractError, DimensionError, EmptyInputError
from ..model.inputs import position_masks, wrap_batch
from ..ndtensor import Tensor, ops
from ..textio import PAD_ID, SEP_ID, SegmentedDoc

HEAD_INIT_STD = 0.02


class BaselineKind(Enum):
    """Length-handling strategies compared against SkIn."""
    TRUNCATE = "truncate"
    HEAD_TAIL = "headtail"
    SLIDE_WINDOW = "slidewindow"


def truncate_input(doc: SegmentedDoc, cap: int) -> np.ndarray:
    """First `cap` tokens, padded with [PAD] when the document is shorter."""
    out = np.full(cap, PAD_ID, dtype=np.int64)
    m = min(cap, doc.tokens.size)
    out[:m] = doc.tokens[:m]
    return out


def head_tail_input(doc: SegmentedDoc, half: int) -> np.ndarray:
    """First `half` real tokens + [SEP] + last `half` real tokens; each side padded to `half`."""
    content = doc.tokens[:doc.content_length]
    head = np.full(half, PAD_ID, dtype=np.int64)
    tail = np.full(half, PAD_ID, dtype=np.int64)
    head_part = content[:half]
    tail_part = content[-half:]
    head[:head_part.size] = head_part
    tail[:tail_part.size] = tail_part
    return np.concatenate([head, [SEP_ID], tail]).astype(np.int64)


@dataclass
class BaselineParams:
    """Strong encoder plus a dense softmax head for one baseline kind."""
    kind: BaselineKind
    encoder: EncoderParams
    w: Tensor          # [U×d]
    b: Tensor          # [U]
    truncate_cap: int
    head_tail_len: int
    mask_padding: bool = False

    @property
    def num_classes(self) -> int:
        return self.b.shape[0]

    @classmethod
    def initialize(
        cls,
        kind: BaselineKind,
        config: EncoderConfig,
        num_classes: int,
        rng: np.random.Generator,
        truncate_cap: int,
        head_tail_len: int,
        segment_len: int,
        mask_padding: bool = False,
    ) -> "BaselineParams":
        needed = {
            BaselineKind.TRUNCATE: truncate_cap + 2,
            BaselineKind.HEAD_TAIL: 2 * head_tail_len + 3,
            BaselineKind.SLIDE_WINDOW: segment_len + 2,
        }[kind]
        config.require_length(needed)
        encoder = EncoderParams.initialize(config, rng)
        return cls(
            kind=kind,
            encoder=encoder,
            w=Tensor(rng.normal(0.0, HEAD_INIT_STD, (num_classes, config.dim)), name="head.weight"),
            b=Tensor(np.zeros(num_classes), name="head.bias"),
            truncate_cap=truncate_cap,
            head_tail_len=head_tail_len,
            mask_padding=mask_padding,
        )

    def named(self) -> Dict[str, Tensor]:
        named = self.encoder.named("strong.")
        named["head.weight"] = self.w
        named["head.bias"] = self.b
        return named

    def manifest(self) -> Dict[str, Any]:
        return {
            "strong": self.encoder.config.to_dict(),
            "num_classes": self.num_classes,
            "truncate_cap": self.truncate_cap,
            "head_tail_len": self.head_tail_len,
            "mask_padding": self.mask_padding,
        }


class BaselineTrace:
    """Batched baseline forward pass; `o` is [B×U]."""

    def __init__(
        self,
        docs: Sequence[SegmentedDoc],
        params: BaselineParams,
        train_mode: bool = False,
        rng: Optional[np.random.Generator] = None,
    ):
        if not docs:
            raise EmptyInputError("no documents to classify")
        self.params = params
        self.batch = len(docs)
        kind = params.kind

        if kind is BaselineKind.TRUNCATE:
            rows = np.stack([truncate_input(d, params.truncate_cap) for d in docs])
        elif kind is BaselineKind.HEAD_TAIL:
            rows = np.stack([head_tail_input(d, params.head_tail_len) for d in docs])
        elif kind is BaselineKind.SLIDE_WINDOW:
            n, l = docs[0].n, docs[0].l
            if any((d.n, d.l) != (n, l) for d in docs):
                raise ContractError("slide-window batch mixes segment geometries")
            self.n = n
            rows = np.stack([d.segments() for d in docs]).reshape(self.batch * n, l)
        else:
            raise ContractError(f"unhandled baseline kind {kind}")

        wrapped = wrap_batch(rows)
        attn_keep, self.pool_keep = position_masks(wrapped, params.mask_padding)
        self.encoder = forward_encoder(wrapped, params.encoder, train_mode, rng, attn_keep)

        if kind is BaselineKind.SLIDE_WINDOW:
            self.pooled = ops.max_pool(self.encoder.output, self.pool_keep)
            self.windows = ops.reshape(self.pooled, (self.batch, self.n, params.encoder.config.dim))
            self.feature = ops.mean_pool(self.windows)
        else:
            self.feature = ops.mean_pool(self.encoder.output, self.pool_keep)
        self.o = ops.row_softmax(ops.linear(self.feature, params.w, params.b))

    def backward(self, d_o: np.ndarray) -> None:
        params = self.params
        d_logits = ops.row_softmax_backward(d_o, self.o)
        d_feature, dw, db = ops.linear_backward(d_logits, self.feature, params.w)
        params.w.accumulate_grad(dw)
        params.b.accumulate_grad(db)
        if params.kind is BaselineKind.SLIDE_WINDOW:
            d_windows = ops.mean_pool_backward(d_feature, self.windows)
            d_pooled = d_windows.reshape(self.pooled.shape)
            d_enc = ops.max_pool_backward(d_pooled, self.encoder.output, self.pool_keep)
        else:
            d_enc = ops.mean_pool_backward(d_feature, self.encoder.output, self.pool_keep)
        self.encoder.backward(d_enc)


def _classify(doc: SegmentedDoc, params: BaselineParams, kind: BaselineKind) -> Tensor:
    if params.kind is not kind:
        raise ContractError(f"parameters belong to '{params.kind.value}', not '{kind.value}'")
    return Tensor(BaselineTrace([doc], params).o.data[0])


def truncate_classify(doc: SegmentedDoc, params: BaselineParams) -> Tensor:
    return _classify(doc, params, BaselineKind.TRUNCATE)


def head_tail_classify(doc: SegmentedDoc, params: BaselineParams) -> Tensor:
    return _classify(doc, params, BaselineKind.HEAD_TAIL)


def slide_window_classify(doc: SegmentedDoc, params: BaselineParams) -> Tensor:
    return _classify(doc, params, BaselineKind.SLIDE_WINDOW)


def predict_baseline(
    docs: Sequence[SegmentedDoc], params: BaselineParams, batch_size: int = 32
) -> np.ndarray:
    """Eval-mode [N×U] probabilities."""
    rows = [
        BaselineTrace(docs[i:i + batch_size], params).o.data
        for i in range(0, len(docs), batch_size)
    ]
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, params.num_classes))


def save_baseline(
    stem: Path,
    params: BaselineParams,
    extra_arrays: Optional[Dict[str, np.ndarray]] = None,
    extra_manifest: Optional[Dict[str, Any]] = None,
    kind: Optional[str] = None,
) -> None:
    arrays = {name: t.data for name, t in params.named().items()}
    arrays.update(extra_arrays or {})
    manifest = {"model": params.manifest()}
    manifest.update(extra_manifest or {})
    save_checkpoint(stem, kind or params.kind.value, arrays, manifest)


def load_baseline(stem: Path, kind: BaselineKind, checkpoint_kind: Optional[str] = None):
    """
    Load a baseline checkpoint; `checkpoint_kind` overrides the stored kind to expect.

    Returns:
        (params, manifest, optimizer arrays).
    """
    manifest, arrays = load_checkpoint(stem, expected_kind=checkpoint_kind or kind.value)
    try:
        model = manifest["model"]
        config = EncoderConfig.from_dict(model["strong"])
        tensors = {
            name[len("strong."):]: Tensor(arr, name=name[len("strong."):])
            for name, arr in arrays.items() if name.startswith("strong.")
        }
        params = BaselineParams(
            kind=kind,
            encoder=EncoderParams(config, tensors),
            w=Tensor(arrays["head.weight"], name="head.weight"),
            b=Tensor(arrays["head.bias"], name="head.bias"),
            truncate_cap=int(model["truncate_cap"]),
            head_tail_len=int(model["head_tail_len"]),
            mask_padding=bool(model.get("mask_padding", False)),
        )
    except (KeyError, TypeError, ContractError, DimensionError) as e:
        raise CheckpointError(f"{stem}: unreadable baseline checkpoint ({e})")
    rest = {k: v for k, v in arrays.items() if k.startswith("adam.")}
    return params, manifest, rest
