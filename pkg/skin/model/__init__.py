"""
SkIn - model
PrC-SaA skimming, key segment selection and KSC intensive classification.
"""

from .params import SkinParams, load_skin, save_skin
from .inputs import position_masks, wrap_batch
from .skim import SkimOutput, SkimTrace, global_vector, saa_logits, saa_weights, skim_forward
from .selection import KeySegment, key_span_bounds, select_key_segment
from .intensive import IntensiveTrace, intensive_forward
from .pipeline import (
    SelectionRecord, predict_prc, predict_skin, read_selection_dump, segment_scores,
    selection_records, write_selection_dump,
)

__all__ = [
    "SkinParams", "load_skin", "save_skin",
    "position_masks", "wrap_batch",
    "SkimOutput", "SkimTrace", "global_vector", "saa_logits", "saa_weights",
    "skim_forward",
    "KeySegment", "key_span_bounds", "select_key_segment",
    "IntensiveTrace", "intensive_forward",
    "SelectionRecord", "predict_prc", "predict_skin", "read_selection_dump",
    "segment_scores", "selection_records", "write_selection_dump",
]
