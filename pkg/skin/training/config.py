"""
SkIn - Training Configuration
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict

from ..errors import ConfigurationError


@dataclass
class TrainConfig:
    """Optimization and regularization settings for all training stages."""
    r_l2: float = 1e-5
    dropout: float = 0.3
    smoothing: float = 0.2
    lr_stage1: float = 1e-4
    lr_stage3: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    batch_size: int = 32
    epochs_stage1: int = 20
    epochs_stage3: int = 10
    epochs_baseline: int = 10
    patience: int = 3
    min_delta: float = 1e-4
    normalize_smoothing: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.r_l2 < 0:
            raise ConfigurationError(f"r_l2 must be >= 0, got {self.r_l2}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 <= self.smoothing < 0.5:
            raise ConfigurationError(f"smoothing must be in [0, 0.5), got {self.smoothing}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if min(self.epochs_stage1, self.epochs_stage3, self.epochs_baseline) < 0:
            raise ConfigurationError("epoch counts must be >= 0")
        if self.patience < 1:
            raise ConfigurationError(f"patience must be >= 1, got {self.patience}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return cls(**data)
