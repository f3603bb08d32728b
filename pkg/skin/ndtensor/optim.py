"""
SkIn - Optimizer
Bias-corrected Adam, per parameter and over a named parameter set.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from ..errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class AdamState:
    """First/second moment buffers and step count for one parameter."""
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param: Tensor) -> "AdamState":
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data), t=0)


def adam_step(
    param: Tensor,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.99,
    eps: float = 1e-8,
) -> Tuple[Tensor, AdamState]:
    """
    Apply one Adam update in place.

    The gradient is read from `param.grad` and left untouched; callers
    zero it before the next accumulation.

    Returns:
        The same (param, state) objects, updated.
    """
    if param.grad is None:
        raise ContractError(f"adam_step: parameter '{param.name}' has no gradient")
    if state.m.shape != param.shape or state.v.shape != param.shape:
        raise DimensionError("adam_step", param.shape, state.m.shape)

    grad = param.grad
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    param.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param, state


class Adam:
    """
    Adam over a dict of named parameters.

    Parameters are stepped in sorted-name order so that runs are
    reproducible regardless of dict construction order.
    """

    def __init__(
        self,
        params: Dict[str, Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.99,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.states: Dict[str, AdamState] = {
            name: AdamState.zeros_like(p) for name, p in params.items()
        }

    def names(self) -> Iterable[str]:
        return sorted(self.params)

    def zero_grad(self) -> None:
        for name in self.names():
            self.params[name].zero_grad()

    def step(self) -> None:
        for name in self.names():
            param = self.params[name]
            if param.grad is None:
                param.zero_grad()
            adam_step(param, self.states[name], self.lr, self.beta1, self.beta2, self.eps)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Flatten the optimizer state into named arrays for checkpointing."""
        arrays: Dict[str, np.ndarray] = {}
        for name in self.names():
            state = self.states[name]
            arrays[f"adam.m.{name}"] = state.m
            arrays[f"adam.v.{name}"] = state.v
        return arrays

    def steps(self) -> Dict[str, int]:
        return {name: self.states[name].t for name in self.names()}

    def load_state(self, arrays: Dict[str, np.ndarray], steps: Optional[Dict[str, int]]) -> None:
        """Restore the buffers written by `state_arrays`/`steps`."""
        for name in self.names():
            m_key, v_key = f"adam.m.{name}", f"adam.v.{name}"
            if m_key not in arrays or v_key not in arrays:
                raise ContractError(f"optimizer state for '{name}' missing from checkpoint")
            t = int((steps or {}).get(name, 0))
            self.states[name] = AdamState(m=arrays[m_key].copy(), v=arrays[v_key].copy(), t=t)
