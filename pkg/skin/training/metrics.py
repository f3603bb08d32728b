"""
SkIn - Metrics
Accuracy, macro-F1, confusion matrices and selection accuracy.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..errors import DimensionError, EmptyInputError, ValidationError


@dataclass
class EvalReport:
    """Classification quality on one test set."""
    accuracy: float
    macro_f1: float
    precision: List[float]
    recall: List[float]
    f1: List[float]
    confusion: List[List[int]]  # [true][predicted]
    total: int
    selection_accuracy: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.selection_accuracy is None:
            data.pop("selection_accuracy")
        if not self.extra:
            data.pop("extra")
        return data


def report_from_confusion(confusion: np.ndarray) -> EvalReport:
    """Build a report from a [true][pred] count matrix."""
    confusion = np.asarray(confusion, dtype=np.int64)
    total = int(confusion.sum())
    if total == 0:
        raise EmptyInputError("cannot evaluate an empty test set")
    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    actual = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2.0 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return EvalReport(
        accuracy=float(tp.sum() / total),
        macro_f1=float(f1.mean()),
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        confusion=confusion.tolist(),
        total=total,
    )


def evaluate_predictions(
    labels: Sequence[int], predictions: Sequence[int], num_classes: int
) -> EvalReport:
    if len(labels) != len(predictions):
        raise DimensionError("evaluate", (len(labels),), (len(predictions),))
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for y, p in zip(labels, predictions):
        if not (0 <= y < num_classes and 0 <= p < num_classes):
            raise ValidationError(f"label/prediction ({y}, {p}) outside [0, {num_classes})")
        confusion[y, p] += 1
    return report_from_confusion(confusion)


def evaluate(predict: Callable[[Sequence[Any]], np.ndarray], test_docs: Sequence[Any]) -> EvalReport:
    """
    Score a model on held-out documents.

    Args:
        predict: Maps documents to an [N×U] probability matrix.
        test_docs: Documents carrying a `label`.
    """
    if len(test_docs) == 0:
        raise EmptyInputError("cannot evaluate an empty test set")
    probs = np.asarray(predict(test_docs))
    predictions = probs.argmax(axis=1).tolist()
    labels = [doc.label for doc in test_docs]
    return evaluate_predictions(labels, predictions, probs.shape[1])


def selection_accuracy(selected: Sequence[int], planted: Sequence[Optional[int]]) -> Optional[float]:
    """Share of documents whose selected key index equals the planted one; None without ground truth."""
    pairs = [(s, p) for s, p in zip(selected, planted) if p is not None]
    if not pairs:
        return None
    return sum(1 for s, p in pairs if s == p) / len(pairs)
