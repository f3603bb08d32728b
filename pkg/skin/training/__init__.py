"""
SkIn - training
Losses, the three-stage methodology, baseline training and evaluation metrics.
"""

from .config import TrainConfig
from .losses import is_regularized, l2_penalty, smooth_labels
from .metrics import (
    EvalReport, evaluate, evaluate_predictions, report_from_confusion, selection_accuracy,
)
from .loop import EpochRecord, StageResult, run_stage, write_training_log
from .stages import (
    DistilledExample, distill_dataset, distilled_from_records, train_baseline, train_stage1,
    train_stage3,
)

__all__ = [
    "TrainConfig",
    "is_regularized", "l2_penalty", "smooth_labels",
    "EvalReport", "evaluate", "evaluate_predictions", "report_from_confusion",
    "selection_accuracy",
    "EpochRecord", "StageResult", "run_stage", "write_training_log",
    "DistilledExample", "distill_dataset", "distilled_from_records", "train_baseline",
    "train_stage1", "train_stage3",
]
