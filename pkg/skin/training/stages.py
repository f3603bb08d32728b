"""
SkIn - Training Stages
Stage 1 trains PrC-SaA on o_pre, stage 2 selects key segments, stage 3
trains the whole pipeline on o; baselines train with the same recipe.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..baselines import BaselineParams, BaselineTrace, save_baseline
from ..encoder import checkpoint_exists, load_checkpoint
from ..errors import ValidationError
from ..model import (
    IntensiveTrace, KeySegment, SelectionRecord, SkimTrace, SkinParams, save_skin,
    selection_records,
)
from ..ndtensor import Tensor
from ..ndtensor.ops import cross_entropy, cross_entropy_backward
from ..textio import SegmentedDoc
from .config import TrainConfig
from .loop import EpochRecord, StageResult, run_stage
from .losses import smooth_labels

logger = logging.getLogger(__name__)

EpochHook = Optional[Callable[[EpochRecord], None]]


def _targets(docs: Sequence[SegmentedDoc], num_classes: int, config: TrainConfig) -> Tensor:
    return Tensor(np.stack([
        smooth_labels(d.label, num_classes, config.smoothing, config.normalize_smoothing).data
        for d in docs
    ]))


def _hits(probs: Tensor, docs: Sequence[SegmentedDoc]) -> int:
    labels = np.array([d.label for d in docs])
    return int(np.sum(probs.data.argmax(axis=1) == labels))


def _restore(params: Dict[str, Tensor], arrays: Dict[str, np.ndarray]) -> None:
    for name, tensor in params.items():
        tensor.data[...] = arrays[name]


def _remove_checkpoint(stem: Path) -> None:
    for suffix in (".npz", ".json"):
        path = stem.with_name(stem.name + suffix)
        if path.exists():
            path.unlink()


def _history_manifest(result: StageResult) -> Dict[str, object]:
    return {"training": {"stage": result.stage, "history": [r.to_dict() for r in result.history]}}


# =============================================================================
# Stage 1
# =============================================================================

def train_stage1(
    train_docs: Sequence[SegmentedDoc],
    params: SkinParams,
    config: TrainConfig,
    checkpoint_dir: Optional[Path] = None,
    on_epoch: EpochHook = None,
    progress: bool = False,
) -> StageResult:
    """
    Train the lite encoder, W_a and the previous-classification head on o_pre.

    With `checkpoint_dir`, state is saved after every epoch to
    `stage1.partial` (resumed automatically) and the trained model to `stage1`.
    """
    num_classes = params.num_classes

    def step(batch: Sequence[SegmentedDoc], rng: np.random.Generator):
        trace = SkimTrace(batch, params, train_mode=True, rng=rng)
        targets = _targets(batch, num_classes, config)
        loss = cross_entropy(trace.o_pre, targets)
        trace.backward(d_o_pre=cross_entropy_backward(trace.o_pre, targets))
        return loss, _hits(trace.o_pre, batch)

    return _run_with_checkpoints(
        "stage1", "prc", train_docs, params, params.stage1_params(), config.lr_stage1,
        config.epochs_stage1, step, config, checkpoint_dir, on_epoch, progress,
    )


# =============================================================================
# Stage 2
# =============================================================================

@dataclass
class DistilledExample:
    """A training document with its frozen key segment."""
    doc: SegmentedDoc
    key: KeySegment
    record: SelectionRecord


def distill_dataset(
    docs: Sequence[SegmentedDoc], params: SkinParams, batch_size: int = 32
) -> List[DistilledExample]:
    """Eval-mode skim and key selection for every document."""
    records = selection_records(docs, params, batch_size)
    return [DistilledExample(doc, rec.to_key(doc), rec) for doc, rec in zip(docs, records)]


def distilled_from_records(
    docs: Sequence[SegmentedDoc], records: Sequence[SelectionRecord]
) -> List[DistilledExample]:
    """Pair documents with selections read back from a dump (matched by doc_id)."""
    by_id = {r.doc_id: r for r in records}
    examples = []
    for doc in docs:
        record = by_id.get(doc.doc_id)
        if record is None:
            raise ValidationError(f"no stage-2 selection for document {doc.doc_id}")
        examples.append(DistilledExample(doc, record.to_key(doc), record))
    return examples


# =============================================================================
# Stage 3
# =============================================================================

def train_stage3(
    distilled: Sequence[DistilledExample],
    params: SkinParams,
    config: TrainConfig,
    checkpoint_dir: Optional[Path] = None,
    on_epoch: EpochHook = None,
    progress: bool = False,
    ablate_local: bool = False,
) -> StageResult:
    """
    Joint training on o with frozen stage-2 key segments.

    The skim branch re-encodes all segments (r_g carries gradient back to
    the lite encoder and W_a); W_op and b_op are left untouched. With
    `ablate_local` the strong encoder is not trained either.
    """
    num_classes = params.num_classes

    def step(batch: Sequence[DistilledExample], rng: np.random.Generator):
        docs = [example.doc for example in batch]
        skim = SkimTrace(docs, params, train_mode=True, rng=rng)
        intensive = IntensiveTrace(
            [example.key for example in batch], skim.r_g, params,
            train_mode=True, rng=rng, ablate_local=ablate_local,
        )
        targets = _targets(docs, num_classes, config)
        loss = cross_entropy(intensive.o, targets)
        d_rg = intensive.backward(cross_entropy_backward(intensive.o, targets))
        skim.backward(d_r_g=d_rg)
        return loss, _hits(intensive.o, docs)

    trainable = params.stage3_params()
    if ablate_local:
        trainable = {k: v for k, v in trainable.items() if not k.startswith("strong.")}
    return _run_with_checkpoints(
        "stage3", "skin", distilled, params, trainable, config.lr_stage3,
        config.epochs_stage3, step, config, checkpoint_dir, on_epoch, progress,
    )


def _run_with_checkpoints(
    stage: str,
    kind: str,
    items: Sequence,
    params: SkinParams,
    trainable: Dict[str, Tensor],
    lr: float,
    epochs: int,
    step,
    config: TrainConfig,
    checkpoint_dir: Optional[Path],
    on_epoch: EpochHook,
    progress: bool,
) -> StageResult:
    resume = None
    save_partial = None
    if checkpoint_dir is not None:
        partial = Path(checkpoint_dir) / f"{stage}.partial"
        if checkpoint_exists(partial):
            manifest, arrays = load_checkpoint(partial, expected_kind=f"{kind}-partial")
            _restore(params.named(), arrays)
            resume = (arrays, manifest["training"])

        def save_partial(adam_arrays, state):
            save_skin(partial, params, f"{kind}-partial", adam_arrays, {"training": state})

    result = run_stage(
        stage, items, trainable, lr, step, config, epochs,
        resume=resume, save_partial=save_partial, on_epoch=on_epoch, progress=progress,
    )
    if checkpoint_dir is not None:
        save_skin(Path(checkpoint_dir) / stage, params, kind, extra_manifest=_history_manifest(result))
        _remove_checkpoint(Path(checkpoint_dir) / f"{stage}.partial")
    return result


# =============================================================================
# Baselines
# =============================================================================

def train_baseline(
    train_docs: Sequence[SegmentedDoc],
    params: BaselineParams,
    config: TrainConfig,
    checkpoint_dir: Optional[Path] = None,
    on_epoch: EpochHook = None,
    progress: bool = False,
) -> StageResult:
    """Train a baseline with L2, dropout, label smoothing and Adam at the stage-3 rate."""
    stage = params.kind.value
    num_classes = params.num_classes

    def step(batch: Sequence[SegmentedDoc], rng: np.random.Generator):
        trace = BaselineTrace(batch, params, train_mode=True, rng=rng)
        targets = _targets(batch, num_classes, config)
        loss = cross_entropy(trace.o, targets)
        trace.backward(cross_entropy_backward(trace.o, targets))
        return loss, _hits(trace.o, batch)

    resume = None
    save_partial = None
    if checkpoint_dir is not None:
        partial = Path(checkpoint_dir) / f"{stage}.partial"
        if checkpoint_exists(partial):
            manifest, arrays = load_checkpoint(partial, expected_kind=f"{stage}-partial")
            _restore(params.named(), arrays)
            resume = (arrays, manifest["training"])

        def save_partial(adam_arrays, state):
            save_baseline(partial, params, adam_arrays, {"training": state}, kind=f"{stage}-partial")

    result = run_stage(
        stage, train_docs, params.named(), config.lr_stage3, step, config,
        config.epochs_baseline, resume=resume, save_partial=save_partial,
        on_epoch=on_epoch, progress=progress,
    )
    if checkpoint_dir is not None:
        save_baseline(Path(checkpoint_dir) / stage, params, extra_manifest=_history_manifest(result))
        _remove_checkpoint(Path(checkpoint_dir) / f"{stage}.partial")
    return result
