"""
SkIn - Document Segmentation
Fixed-size n×l token grids and special-token wrapping.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..errors import ConfigurationError, ValidationError
from .vocab import CLS_ID, PAD_ID, SEP_ID


@dataclass
class SegmentedDoc:
    """A document truncated/padded to n·l tokens, viewed as n segments of length l."""
    tokens: np.ndarray
    n: int
    l: int
    label: int
    raw_length: int
    doc_id: str = ""
    key_index: Optional[int] = None

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64).reshape(-1)
        if self.tokens.size != self.n * self.l:
            raise ValidationError(
                f"document {self.doc_id or '?'} has {self.tokens.size} tokens, expected n·l = {self.n * self.l}"
            )
        if self.label < 0:
            raise ValidationError(f"document {self.doc_id or '?'} has negative label {self.label}")

    @property
    def content_length(self) -> int:
        """Number of real (non-padding) tokens at the front of `tokens`."""
        return min(self.raw_length, self.n * self.l)

    def segments(self) -> np.ndarray:
        """[n×l] view of the token grid."""
        return self.tokens.reshape(self.n, self.l)

    def segment(self, i: int) -> np.ndarray:
        return self.tokens[i * self.l:(i + 1) * self.l]


def validate_geometry(n: int, l: int) -> None:
    """Segment counts below 2 or lengths not divisible by 4 break key selection."""
    if n < 2:
        raise ConfigurationError(f"segment count n must be >= 2, got {n}")
    if l < 4 or l % 4 != 0:
        raise ConfigurationError(f"segment length l must be >= 4 and divisible by 4, got {l}")


def segment_document(
    ids: Sequence[int],
    n: int,
    l: int,
    label: int,
    doc_id: str = "",
    key_index: Optional[int] = None,
) -> SegmentedDoc:
    """Truncate to n·l tokens and pad the tail with [PAD]."""
    validate_geometry(n, l)
    total = n * l
    kept = list(ids[:total])
    tokens = np.full(total, PAD_ID, dtype=np.int64)
    tokens[:len(kept)] = kept
    return SegmentedDoc(
        tokens=tokens, n=n, l=l, label=label,
        raw_length=len(ids), doc_id=doc_id, key_index=key_index,
    )


def wrap_specials(segment: Sequence[int]) -> List[int]:
    """[CLS] + segment + [SEP]."""
    return [CLS_ID] + [int(t) for t in segment] + [SEP_ID]
