"""Shared fixtures: toy encoder configs and small planted-key corpora."""

import numpy as np
import pytest

from skin.encoder import EncoderConfig
from skin.textio import SynthSpec, synth_generate


def toy_config(name: str = "toy", dim: int = 8, heads: int = 2, layers: int = 1,
               vocab_size: int = 40, max_len: int = 16, dropout: float = 0.0) -> EncoderConfig:
    return EncoderConfig(
        name=name, layers=layers, heads=heads, dim=dim, ff_dim=2 * dim,
        max_len=max_len, vocab_size=vocab_size, dropout=dropout,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_pair():
    """(lite, strong) small enough for finite differences."""
    return toy_config("lite", dim=4, heads=1), toy_config("strong", dim=8, heads=2)


@pytest.fixture
def tiny_corpus():
    """30 planted-key documents, n=2, l=4, vocab 40."""
    spec = SynthSpec(num_docs=30, n=2, l=4, num_classes=3, vocab_size=40,
                     signal_count=2, signal_pool_size=2, seed=5)
    return [doc for doc, _ in synth_generate(spec)]
