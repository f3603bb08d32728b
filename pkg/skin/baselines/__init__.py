"""
SkIn - baselines
Strong-encoder baselines: truncation, head+tail and sliding window.
"""

from .classifiers import (
    BaselineKind, BaselineParams, BaselineTrace, head_tail_classify, head_tail_input,
    load_baseline, predict_baseline, save_baseline, slide_window_classify,
    truncate_classify, truncate_input,
)

__all__ = [
    "BaselineKind", "BaselineParams", "BaselineTrace", "head_tail_classify",
    "head_tail_input", "load_baseline", "predict_baseline", "save_baseline",
    "slide_window_classify", "truncate_classify", "truncate_input",
]
