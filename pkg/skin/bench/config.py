"""
SkIn - Benchmark Configuration
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from ..errors import ConfigurationError

DEFAULT_METHODS = ["bert", "slidewindow", "skin-invariable", "skin-variable"]
DEFAULT_LENGTHS = [128, 256, 512, 1024, 2048]


@dataclass
class BenchConfig:
    """Cost sweep settings."""
    methods: List[str] = field(default_factory=lambda: list(DEFAULT_METHODS))
    lengths: List[int] = field(default_factory=lambda: list(DEFAULT_LENGTHS))
    trials: int = 5
    warmup: int = 1
    batch_size: int = 16
    micro_batch: int = 4
    segment_count: int = 8        # n for slidewindow and skin-invariable
    segment_length: int = 64      # l for skin-variable
    encoder_length_limit: int = 512
    element_budget: Optional[int] = None
    num_classes: int = 3
    vocab_size: int = 1000
    lr: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if not self.methods:
            raise ConfigurationError("bench: at least one method is required")
        if not self.lengths:
            raise ConfigurationError("bench: at least one length is required")
        if list(self.lengths) != sorted(set(self.lengths)):
            raise ConfigurationError(f"bench: lengths must be strictly ascending, got {self.lengths}")
        if self.trials < 1:
            raise ConfigurationError("bench: trials must be >= 1")
        if self.warmup < 0:
            raise ConfigurationError("bench: warmup must be >= 0")
        if self.batch_size < 1 or not 1 <= self.micro_batch <= self.batch_size:
            raise ConfigurationError("bench: need 1 <= micro_batch <= batch_size")
        if self.segment_count < 2:
            raise ConfigurationError("bench: segment_count must be >= 2")
        if self.segment_length < 4 or self.segment_length % 4:
            raise ConfigurationError("bench: segment_length must be >= 4 and divisible by 4")
        if self.encoder_length_limit < 1:
            raise ConfigurationError("bench: encoder_length_limit must be >= 1")
        if self.element_budget is not None and self.element_budget < 1:
            raise ConfigurationError("bench: element_budget must be positive when set")
        if self.num_classes < 2 or self.vocab_size < 5:
            raise ConfigurationError("bench: need num_classes >= 2 and vocab_size >= 5")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BenchConfig":
        return cls(**data)
