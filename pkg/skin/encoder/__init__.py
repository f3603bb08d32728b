"""
SkIn - encoder
Lite and Strong transformer encoders, pooling, cost model and checkpoints.
"""

from ..ndtensor.ops import self_attention, self_attention_backward
from .config import ENCODER_PRESETS, EncoderConfig, preset_config, with_overrides
from .transformer import (
    AttentionCost, EncoderCall, EncoderParams, EncoderTrace, attention_cost, encode,
    forward_encoder, pool, record_encoder_calls,
)
from .checkpoint import CHECKPOINT_VERSION, checkpoint_exists, load_checkpoint, save_checkpoint

__all__ = [
    "self_attention", "self_attention_backward",
    "ENCODER_PRESETS", "EncoderConfig", "preset_config", "with_overrides",
    "AttentionCost", "EncoderCall", "EncoderParams", "EncoderTrace", "attention_cost",
    "encode", "forward_encoder", "pool", "record_encoder_calls",
    "CHECKPOINT_VERSION", "checkpoint_exists", "load_checkpoint", "save_checkpoint",
]
