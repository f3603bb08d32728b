"""
SkIn - Tensor
Dense float64 arrays with an optional gradient buffer and a live-element counter.
"""

import weakref
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import DimensionError, NonFiniteError


@dataclass
class AllocationCounter:
    """
    Tracks how many Tensor elements are alive and the peak since the last reset.

    The bench harness reads `peak` after a training step to get the
    measured memory footprint in elements.
    """
    live: int = 0
    peak: int = 0

    def add(self, count: int) -> None:
        self.live += count
        if self.live > self.peak:
            self.peak = self.live

    def release(self, count: int) -> None:
        self.live -= count

    def reset(self) -> None:
        """Start a new measurement window from the current live count."""
        self.peak = self.live


_COUNTER = AllocationCounter()


def allocation_counter() -> AllocationCounter:
    """Get the process-wide allocation counter."""
    return _COUNTER


class Tensor:
    """
    A dense row-major float64 array.

    Values are checked for finiteness on construction so a NaN or Inf
    never travels silently through the model.
    """

    def __init__(self, data, name: str = "", check_finite: bool = True):
        array = np.array(data, dtype=np.float64)
        if check_finite and not np.all(np.isfinite(array)):
            label = f" '{name}'" if name else ""
            raise NonFiniteError(f"tensor{label} contains NaN or Inf values")
        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.name = name
        size = int(array.size)
        _COUNTER.add(size)
        weakref.finalize(self, _COUNTER.release, size)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def zero_grad(self) -> None:
        """Reset the gradient buffer to zeros."""
        self.grad = np.zeros_like(self.data)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add `grad` into the gradient buffer, allocating it on first use."""
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            raise DimensionError(f"accumulate_grad[{self.name}]", self.data.shape, grad.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), name=self.name)

    def __repr__(self) -> str:
        label = f"name={self.name!r}, " if self.name else ""
        return f"Tensor({label}shape={self.shape})"
