"""
SkIn - Key Segment Selection
Argmax over segment weights, then a fixed 1.5·l token window around it.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import ContractError, DimensionError
from ..ndtensor import Tensor
from ..textio import SegmentedDoc, validate_geometry


@dataclass
class KeySegment:
    """The selected window: key index k and tokens[start:start+1.5·l]."""
    k: int
    start: int
    span: np.ndarray
    doc_id: str = ""

    @property
    def end(self) -> int:
        return self.start + len(self.span)


def key_span_bounds(k: int, n: int, l: int) -> Tuple[int, int]:
    """
    Token bounds [start, end) of the key window for segment k.

    k == 0 takes [0, 1.5l); k == n-1 takes the last 1.5l tokens; any other
    k takes [l(k-1) - l/4, lk + l/4). At k == 1 that start is negative and
    the window is moved right to begin at 0.
    """
    validate_geometry(n, l)
    if not 0 <= k < n:
        raise ContractError(f"key index {k} outside [0, {n})")
    half, quarter = l // 2, l // 4
    if k == 0:
        return 0, l + half
    if k == n - 1:
        return l * (n - 1) - half, l * n
    start, end = l * (k - 1) - quarter, l * k + quarter
    if start < 0:
        start, end = 0, end - start
    return start, end


def select_key_segment(g, doc: SegmentedDoc) -> KeySegment:
    """Pick k = argmax(g) (lowest index on ties) and cut its window from `doc`."""
    weights = g.data if isinstance(g, Tensor) else np.asarray(g, dtype=np.float64)
    if weights.shape != (doc.n,):
        raise DimensionError("select_key_segment", weights.shape, (doc.n,))
    k = int(np.argmax(weights))
    start, end = key_span_bounds(k, doc.n, doc.l)
    return KeySegment(k=k, start=start, span=doc.tokens[start:end].copy(), doc_id=doc.doc_id)
