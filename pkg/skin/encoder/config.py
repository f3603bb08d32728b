"""
SkIn - Encoder Configuration
Transformer encoder sizes and the named Lite/Strong presets.
"""

from dataclasses import asdict, dataclass, replace
from typing import Any, Dict

from ..errors import ConfigurationError


@dataclass
class EncoderConfig:
    """Transformer encoder hyperparameters."""
    name: str
    layers: int
    heads: int
    dim: int
    ff_dim: int
    max_len: int
    vocab_size: int
    dropout: float = 0.3

    def __post_init__(self):
        if self.layers < 0 or self.heads < 1 or self.dim < 1 or self.ff_dim < 1:
            raise ConfigurationError(f"encoder '{self.name}': sizes must be positive")
        if self.dim % self.heads != 0:
            raise ConfigurationError(
                f"encoder '{self.name}': dim {self.dim} not divisible by heads {self.heads}"
            )
        if self.max_len < 1:
            raise ConfigurationError(f"encoder '{self.name}': max_len must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"encoder '{self.name}': dropout must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def require_length(self, length: int) -> None:
        """Fail early when an input of `length` ids (specials included) cannot fit."""
        if length > self.max_len:
            raise ConfigurationError(
                f"encoder '{self.name}': max_len {self.max_len} < required input length {length}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EncoderConfig":
        return cls(**data)


# Encoder sizes per preset; vocab_size/max_len/dropout are filled from the run.
ENCODER_PRESETS: Dict[str, Dict[str, Dict[str, int]]] = {
    "desk": {
        "lite": {"layers": 2, "dim": 32, "heads": 2, "ff_dim": 64},
        "strong": {"layers": 4, "dim": 64, "heads": 4, "ff_dim": 128},
    },
    "full": {
        "lite": {"layers": 2, "dim": 128, "heads": 2, "ff_dim": 512},
        "strong": {"layers": 12, "dim": 768, "heads": 12, "ff_dim": 3072},
    },
}


def preset_config(
    preset: str,
    role: str,
    vocab_size: int,
    max_len: int = 514,
    dropout: float = 0.3,
) -> EncoderConfig:
    """
    Build the Lite or Strong encoder config of a named preset.

    Args:
        preset: "desk" or "full".
        role: "lite" or "strong".
        vocab_size: Vocabulary size of the corpus.
        max_len: Longest input (ids, specials included) the encoder accepts.
        dropout: Dropout probability used in train mode.
    """
    if preset not in ENCODER_PRESETS:
        raise ConfigurationError(
            f"unknown preset '{preset}' (available: {', '.join(sorted(ENCODER_PRESETS))})"
        )
    sizes = ENCODER_PRESETS[preset].get(role)
    if sizes is None:
        raise ConfigurationError(f"unknown encoder role '{role}'")
    return EncoderConfig(
        name=role, vocab_size=vocab_size, max_len=max_len, dropout=dropout, **sizes
    )


def with_overrides(config: EncoderConfig, **changes: Any) -> EncoderConfig:
    return replace(config, **changes)
