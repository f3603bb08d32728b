"""
SkIn - Synthetic Corpus
Planted-key documents: class signal lives in exactly one known segment.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from ..errors import ConfigurationError
from .dataset import Record
from .segment import SegmentedDoc, validate_geometry
from .vocab import RESERVED_TOKENS, Vocab


@dataclass
class SynthSpec:
    """Synthetic corpus parameters."""
    num_docs: int = 2000
    n: int = 8
    l: int = 32
    num_classes: int = 3
    vocab_size: int = 1000
    signal_count: int = 8        # class tokens planted in the key segment
    signal_pool_size: int = 4    # distinct signal tokens per class
    noise_rate: float = 0.0      # share of planted tokens drawn from another class
    seed: int = 7

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthSpec":
        return cls(**data)

    def validate(self) -> None:
        validate_geometry(self.n, self.l)
        if self.num_docs < 1:
            raise ConfigurationError(f"num_docs must be >= 1, got {self.num_docs}")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if not 0 <= self.signal_count <= self.l:
            raise ConfigurationError(
                f"signal_count must be in [0, l={self.l}], got {self.signal_count}"
            )
        if self.signal_pool_size < 1:
            raise ConfigurationError("signal_pool_size must be >= 1")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigurationError(f"noise_rate must be in [0, 1], got {self.noise_rate}")
        if self.noise_pool_size() < 2:
            needed = len(RESERVED_TOKENS) + self.num_classes * self.signal_pool_size + 2
            raise ConfigurationError(
                f"vocab_size {self.vocab_size} too small for disjoint signal/noise pools "
                f"(need at least {needed})"
            )

    def noise_pool_size(self) -> int:
        return self.vocab_size - len(RESERVED_TOKENS) - self.num_classes * self.signal_pool_size


def signal_ids(spec: SynthSpec) -> np.ndarray:
    """[U×pool] ids of each class's signal tokens."""
    base = len(RESERVED_TOKENS)
    return base + np.arange(spec.num_classes * spec.signal_pool_size).reshape(
        spec.num_classes, spec.signal_pool_size
    )


def noise_ids(spec: SynthSpec) -> np.ndarray:
    start = len(RESERVED_TOKENS) + spec.num_classes * spec.signal_pool_size
    return np.arange(start, spec.vocab_size)


def synth_vocab(spec: SynthSpec) -> Vocab:
    """Deterministic vocabulary: signal tokens `sig<c>_<j>`, then noise words `w<j>`."""
    spec.validate()
    signal = [
        f"sig{c}_{j}"
        for c in range(spec.num_classes)
        for j in range(spec.signal_pool_size)
    ]
    noise = [f"w{j}" for j in range(spec.noise_pool_size())]
    return Vocab(signal + noise)


def synth_generate(spec: SynthSpec) -> List[Tuple[SegmentedDoc, int]]:
    """
    Generate the planted-key corpus.

    Every token outside the planted segment is class-independent noise; the
    planted segment carries `signal_count` signal tokens at random positions.

    Returns:
        (document, planted key index) pairs.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    signals = signal_ids(spec)
    noise = noise_ids(spec)
    total = spec.n * spec.l

    corpus: List[Tuple[SegmentedDoc, int]] = []
    for i in range(spec.num_docs):
        label = int(rng.integers(spec.num_classes))
        key = int(rng.integers(spec.n))
        tokens = rng.choice(noise, size=total)
        if spec.signal_count:
            offsets = rng.choice(spec.l, size=spec.signal_count, replace=False)
            planted = rng.choice(signals[label], size=spec.signal_count)
            swap = rng.random(spec.signal_count) < spec.noise_rate
            for j in np.flatnonzero(swap):
                other = (label + 1 + int(rng.integers(spec.num_classes - 1))) % spec.num_classes
                planted[j] = rng.choice(signals[other])
            tokens[key * spec.l + offsets] = planted
        doc = SegmentedDoc(
            tokens=tokens, n=spec.n, l=spec.l, label=label,
            raw_length=total, doc_id=f"synth-{i:05d}", key_index=key,
        )
        corpus.append((doc, key))
    return corpus


def synth_records(spec: SynthSpec, vocab: Vocab) -> List[Record]:
    """Render the corpus as text records (tokenizing them restores the ids)."""
    return [
        Record(
            text=" ".join(vocab.token(int(t)) for t in doc.tokens),
            label=doc.label,
            key_index=key,
        )
        for doc, key in synth_generate(spec)
    ]
