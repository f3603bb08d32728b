"""
SkIn - Training Loop
Seeded minibatch Adam epochs with early stopping and per-epoch resume state.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..errors import EmptyInputError, NonFiniteError, TrainingDivergedError
from ..ndtensor import Adam, Tensor
from .config import TrainConfig
from .losses import l2_penalty

logger = logging.getLogger(__name__)

# Mixed into the per-epoch seed so stages never share a random stream.
STAGE_SEEDS = {"stage1": 1, "stage3": 3, "truncate": 11, "headtail": 12, "slidewindow": 13}

# step(batch, rng) -> (mean data loss of the batch, number of correct predictions)
StepFn = Callable[[Sequence[Any], np.random.Generator], Tuple[float, int]]


@dataclass
class EpochRecord:
    """One row of the training log."""
    stage: str
    epoch: int
    mean_loss: float
    train_acc: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class StageResult:
    stage: str
    history: List[EpochRecord]
    stopped_early: bool = False

    @property
    def losses(self) -> List[float]:
        return [record.mean_loss for record in self.history]


def _plateau_state(history: Sequence[EpochRecord], min_delta: float) -> Tuple[float, int]:
    best, stale = math.inf, 0
    for record in history:
        if record.mean_loss < best - min_delta:
            best, stale = record.mean_loss, 0
        else:
            stale += 1
    return best, stale


def run_stage(
    stage: str,
    items: Sequence[Any],
    params: Dict[str, Tensor],
    lr: float,
    step_fn: StepFn,
    config: TrainConfig,
    epochs: int,
    resume: Optional[Tuple[Dict[str, np.ndarray], Dict[str, Any]]] = None,
    save_partial: Optional[Callable[[Dict[str, np.ndarray], Dict[str, Any]], None]] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
    progress: bool = False,
) -> StageResult:
    """
    Train `params` for up to `epochs` epochs.

    Each epoch draws its shuffle and dropout masks from a generator seeded
    with (seed, stage, epoch), so a run resumed from a partial checkpoint
    matches an uninterrupted one bit for bit.

    Args:
        stage: Stage name (key of STAGE_SEEDS).
        items: Training examples handed to `step_fn` in minibatches.
        params: Parameters optimized (and L2-regularized) in this stage.
        lr: Adam learning rate.
        step_fn: Runs forward + backward on one batch.
        config: Training settings.
        epochs: Epoch budget.
        resume: (optimizer arrays, training state) from a partial checkpoint.
        save_partial: Called after every epoch with the same pair.
        on_epoch: Called with each finished epoch's record.
        progress: Show a tqdm bar per epoch.
    """
    if len(items) == 0:
        raise EmptyInputError(f"{stage}: no training examples")
    optimizer = Adam(params, lr, config.beta1, config.beta2, config.eps)
    history: List[EpochRecord] = []
    start_epoch = 0
    if resume is not None:
        arrays, state = resume
        optimizer.load_state(arrays, state.get("adam_steps"))
        history = [EpochRecord(**row) for row in state.get("history", [])]
        start_epoch = int(state.get("next_epoch", len(history)))
        logger.info("%s: resuming at epoch %d", stage, start_epoch + 1)

    best, stale = _plateau_state(history, config.min_delta)
    num_batches = math.ceil(len(items) / config.batch_size)
    global_step = start_epoch * num_batches
    stopped_early = False

    for epoch in range(start_epoch, epochs):
        if stale >= config.patience:
            stopped_early = True
            logger.info("%s: loss plateaued, stopping after epoch %d", stage, epoch)
            break
        rng = np.random.default_rng([config.seed, STAGE_SEEDS[stage], epoch])
        order = rng.permutation(len(items))
        batches = [order[i:i + config.batch_size] for i in range(0, len(items), config.batch_size)]

        total_loss, correct = 0.0, 0
        for idx in tqdm(batches, desc=f"{stage} {epoch + 1}/{epochs}", disable=not progress, leave=False):
            batch = [items[i] for i in idx]
            optimizer.zero_grad()
            try:
                data_loss, hits = step_fn(batch, rng)
            except NonFiniteError as e:
                raise TrainingDivergedError(stage, global_step, str(e))
            loss = data_loss + l2_penalty(params, config.r_l2)
            if not math.isfinite(loss):
                raise TrainingDivergedError(stage, global_step, f"loss is {loss}")
            optimizer.step()
            total_loss += loss * len(batch)
            correct += int(hits)
            global_step += 1

        record = EpochRecord(stage, epoch + 1, float(total_loss / len(items)), correct / len(items))
        history.append(record)
        if record.mean_loss < best - config.min_delta:
            best, stale = record.mean_loss, 0
        else:
            stale += 1
        logger.info("%s epoch %d: loss %.6f acc %.4f", stage, record.epoch, record.mean_loss, record.train_acc)
        if on_epoch is not None:
            on_epoch(record)
        if save_partial is not None:
            save_partial(optimizer.state_arrays(), {
                "next_epoch": epoch + 1,
                "history": [r.to_dict() for r in history],
                "adam_steps": optimizer.steps(),
            })

    return StageResult(stage=stage, history=history, stopped_early=stopped_early)


def write_training_log(rows: Sequence[EpochRecord], path: Path) -> None:
    """CSV with columns epoch, stage, mean_loss, train_acc."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "stage", "mean_loss", "train_acc"])
        for row in rows:
            writer.writerow([row.epoch, row.stage, repr(row.mean_loss), repr(row.train_acc)])
