"""
SkIn - Encoder Inputs
Batched special-token wrapping and the attention/pooling position masks.
"""

from typing import Optional, Tuple

import numpy as np

from ..textio import CLS_ID, PAD_ID, SEP_ID


def wrap_batch(rows: np.ndarray) -> np.ndarray:
    """[B×m] ids -> [B×(m+2)] with [CLS] first and [SEP] last in every row."""
    rows = np.asarray(rows, dtype=np.int64)
    batch = rows.shape[0]
    cls_col = np.full((batch, 1), CLS_ID, dtype=np.int64)
    sep_col = np.full((batch, 1), SEP_ID, dtype=np.int64)
    return np.concatenate([cls_col, rows, sep_col], axis=1)


def position_masks(
    wrapped: np.ndarray, mask_padding: bool
) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """
    Masks for a wrapped batch.

    Returns:
        (attention keep-mask or None, pooling keep-mask). Pooling covers the
        content positions between [CLS] and [SEP]; with `mask_padding` it also
        skips [PAD]. A row with no content left pools over its two specials.
    """
    pool_keep = np.zeros(wrapped.shape, dtype=bool)
    pool_keep[:, 1:-1] = True
    if not mask_padding:
        return None, pool_keep
    real = wrapped != PAD_ID
    pool_keep &= real
    empty = ~pool_keep.any(axis=1)
    pool_keep[empty, 0] = True
    pool_keep[empty, -1] = True
    return real, pool_keep
