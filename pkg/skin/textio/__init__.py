"""
SkIn - textio
Tokenization, segmentation, datasets and the synthetic planted-key corpus.
"""

from .vocab import (
    CLS_ID, PAD_ID, SEP_ID, UNK_ID, RESERVED_TOKENS, Vocab, split_words, tokenize,
)
from .segment import SegmentedDoc, segment_document, validate_geometry, wrap_specials
from .dataset import (
    Record, TestSplit, TrainSplit, corpus_statistics, encode_records, load_jsonl,
    split_train_test, write_jsonl,
)
from .synth import SynthSpec, noise_ids, signal_ids, synth_generate, synth_records, synth_vocab

__all__ = [
    "CLS_ID", "PAD_ID", "SEP_ID", "UNK_ID", "RESERVED_TOKENS",
    "Vocab", "split_words", "tokenize",
    "SegmentedDoc", "segment_document", "validate_geometry", "wrap_specials",
    "Record", "TestSplit", "TrainSplit", "corpus_statistics", "encode_records",
    "load_jsonl", "split_train_test", "write_jsonl",
    "SynthSpec", "noise_ids", "signal_ids", "synth_generate", "synth_records", "synth_vocab",
]
