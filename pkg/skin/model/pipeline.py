"""
SkIn - Inference Pipeline
Skim -> select -> intensive prediction, selection audit dumps and segment listings.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DatasetError, ValidationError
from ..textio import SegmentedDoc
from .intensive import IntensiveTrace
from .params import SkinParams
from .selection import KeySegment, key_span_bounds, select_key_segment
from .skim import SkimTrace


def _batches(items: Sequence[Any], size: int):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def predict_prc(
    docs: Sequence[SegmentedDoc], params: SkinParams, batch_size: int = 32
) -> np.ndarray:
    """Skim-only predictions: [N×U] o_pre probabilities."""
    rows = [SkimTrace(batch, params).o_pre.data for batch in _batches(docs, batch_size)]
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, params.num_classes))


def predict_skin(
    docs: Sequence[SegmentedDoc],
    params: SkinParams,
    batch_size: int = 32,
    ablate_local: bool = False,
) -> Tuple[np.ndarray, List[KeySegment]]:
    """
    Full pipeline in eval mode.

    Returns:
        ([N×U] class probabilities, selected key segments).
    """
    probs: List[np.ndarray] = []
    keys: List[KeySegment] = []
    for batch in _batches(docs, batch_size):
        skim = SkimTrace(batch, params)
        batch_keys = [
            select_key_segment(skim.g.data[b], doc) for b, doc in enumerate(batch)
        ]
        intensive = IntensiveTrace(batch_keys, skim.r_g, params, ablate_local=ablate_local)
        probs.append(intensive.o.data)
        keys.extend(batch_keys)
    if not probs:
        return np.zeros((0, params.num_classes)), keys
    return np.concatenate(probs, axis=0), keys


def segment_scores(doc: SegmentedDoc, params: SkinParams) -> List[Dict[str, Any]]:
    """Per-segment weights of one document, with the selected segment marked."""
    g = SkimTrace([doc], params).g.data[0]
    k = int(np.argmax(g))
    return [
        {
            "segment": i,
            "weight": float(g[i]),
            "selected": i == k,
            "planted": doc.key_index == i if doc.key_index is not None else None,
            "tokens": doc.segment(i).tolist(),
        }
        for i in range(doc.n)
    ]


# =============================================================================
# Selection audit dump
# =============================================================================

@dataclass
class SelectionRecord:
    """One line of the stage-2 selection dump."""
    doc_id: str
    k: int
    start: int
    g: List[float]
    planted_key: Optional[int] = None

    def to_key(self, doc: SegmentedDoc) -> KeySegment:
        """Rebuild the key window for `doc` and check it matches the record."""
        start, end = key_span_bounds(self.k, doc.n, doc.l)
        if start != self.start:
            raise ValidationError(
                f"selection for {self.doc_id}: start {self.start} does not match k={self.k} ({start})"
            )
        return KeySegment(k=self.k, start=start, span=doc.tokens[start:end].copy(), doc_id=doc.doc_id)


def selection_records(
    docs: Sequence[SegmentedDoc], params: SkinParams, batch_size: int = 32
) -> List[SelectionRecord]:
    """Eval-mode skim over `docs` and key segment selection per document."""
    records: List[SelectionRecord] = []
    for batch in _batches(docs, batch_size):
        skim = SkimTrace(batch, params)
        for b, doc in enumerate(batch):
            key = select_key_segment(skim.g.data[b], doc)
            records.append(SelectionRecord(
                doc_id=doc.doc_id,
                k=key.k,
                start=key.start,
                g=[float(x) for x in skim.g.data[b]],
                planted_key=doc.key_index,
            ))
    return records


def write_selection_dump(records: Sequence[SelectionRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            obj: Dict[str, Any] = {"doc_id": r.doc_id, "k": r.k, "start": r.start, "g": r.g}
            if r.planted_key is not None:
                obj["planted_key"] = r.planted_key
            f.write(json.dumps(obj) + "\n")


def read_selection_dump(path: Path) -> List[SelectionRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Selection dump not found: {path}")
    records: List[SelectionRecord] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(SelectionRecord(
                    doc_id=str(obj["doc_id"]),
                    k=int(obj["k"]),
                    start=int(obj["start"]),
                    g=[float(x) for x in obj["g"]],
                    planted_key=obj.get("planted_key"),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DatasetError(f"bad selection record ({e})", line=line_no)
    return records
