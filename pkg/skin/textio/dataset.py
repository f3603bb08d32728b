"""
SkIn - Datasets
JSONL ingestion/emission, document encoding and the seeded train/test split.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, DatasetError, EmptyInputError, ValidationError
from .segment import SegmentedDoc, segment_document
from .vocab import Vocab, tokenize


@dataclass
class Record:
    """One labelled document as stored on disk."""
    text: str
    label: int
    key_index: Optional[int] = None


def _require_int(obj: Dict[str, Any], key: str, line: int) -> int:
    if key not in obj:
        raise DatasetError(f"missing field '{key}'", line=line)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetError(f"field '{key}' must be an integer", line=line)
    return value


def load_jsonl(path: Path, num_classes: Optional[int] = None) -> List[Record]:
    """
    Load records in file order.

    Args:
        path: JSONL file, one {"text": str, "label": int[, "key_index": int]} per line.
        num_classes: When given, labels must lie in [0, num_classes).

    Returns:
        List of records (empty for an empty file).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")

    records: List[Record] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"invalid JSON ({e.msg})", line=line_no)
            if not isinstance(obj, dict):
                raise DatasetError("expected a JSON object", line=line_no)
            text = obj.get("text")
            if not isinstance(text, str):
                raise DatasetError("missing string field 'text'", line=line_no)
            label = _require_int(obj, "label", line_no)
            if label < 0 or (num_classes is not None and label >= num_classes):
                raise ValidationError(
                    f"line {line_no}: label {label} outside [0, {num_classes})"
                )
            key_index = _require_int(obj, "key_index", line_no) if "key_index" in obj else None
            records.append(Record(text=text, label=label, key_index=key_index))
    return records


def write_jsonl(records: Sequence[Record], path: Path) -> None:
    """Write records with a fixed field order so reruns are byte-identical."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            obj: Dict[str, Any] = {"text": record.text, "label": record.label}
            if record.key_index is not None:
                obj["key_index"] = record.key_index
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


def encode_records(
    records: Sequence[Record], vocab: Vocab, n: int, l: int, prefix: str = "doc"
) -> List[SegmentedDoc]:
    """Tokenize and segment records; doc ids follow file position."""
    return [
        segment_document(
            tokenize(r.text, vocab), n, l, r.label,
            doc_id=f"{prefix}-{i:05d}", key_index=r.key_index,
        )
        for i, r in enumerate(records)
    ]


@dataclass
class TrainSplit:
    """Documents reserved for training."""
    docs: List[Any] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[Any]:
        return iter(self.docs)

    def __getitem__(self, i):
        return self.docs[i]


@dataclass
class TestSplit:
    """Held-out documents; only evaluation reads their labels."""
    docs: List[Any] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[Any]:
        return iter(self.docs)

    def __getitem__(self, i):
        return self.docs[i]


def split_train_test(
    docs: Sequence[Any], eval_fraction: float = 0.3, seed: int = 0
) -> Tuple[TrainSplit, TestSplit]:
    """
    Seeded shuffle then split; round(N·fraction) documents go to test.

    Each side keeps the input's relative order.
    """
    if len(docs) == 0:
        raise EmptyInputError("cannot split an empty corpus")
    if not 0.0 < eval_fraction < 1.0:
        raise ConfigurationError(f"eval_fraction must be in (0, 1), got {eval_fraction}")
    test_count = int(math.floor(len(docs) * eval_fraction + 0.5))
    order = np.random.default_rng(seed).permutation(len(docs))
    test_idx = sorted(order[:test_count].tolist())
    train_idx = sorted(order[test_count:].tolist())
    return (
        TrainSplit([docs[i] for i in train_idx]),
        TestSplit([docs[i] for i in test_idx]),
    )


def corpus_statistics(
    train_labels: Sequence[int], test_labels: Sequence[int], num_classes: int
) -> List[Dict[str, int]]:
    """Per-label train/test/total counts, followed by an overall row (label -1)."""
    rows = []
    for label in range(num_classes):
        tr = sum(1 for y in train_labels if y == label)
        te = sum(1 for y in test_labels if y == label)
        rows.append({"label": label, "train": tr, "test": te, "total": tr + te})
    rows.append({
        "label": -1,
        "train": len(train_labels),
        "test": len(test_labels),
        "total": len(train_labels) + len(test_labels),
    })
    return rows
