"""
SkIn - ndtensor
Dense float64 tensors, explicit forward/backward operations, Adam and grad checks.
"""

from .tensor import AllocationCounter, Tensor, allocation_counter
from .optim import Adam, AdamState, adam_step
from .gradcheck import grad_check
from . import ops

__all__ = [
    "Adam",
    "AdamState",
    "AllocationCounter",
    "Tensor",
    "adam_step",
    "allocation_counter",
    "grad_check",
    "ops",
]
