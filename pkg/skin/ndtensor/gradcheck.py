"""
SkIn - Gradient Check
Central finite differences against the explicit backward passes.
"""

import math
from typing import Callable, Sequence, Tuple

import numpy as np

from ..errors import GradCheckError
from .tensor import Tensor

# f() -> (loss, backward); calling backward() accumulates into each input's .grad
Objective = Callable[[], Tuple[float, Callable[[], None]]]


def _evaluate(f: Objective) -> float:
    value, _ = f()
    value = float(value)
    if not math.isfinite(value):
        raise GradCheckError(f"objective evaluated to {value}")
    return value


def grad_check(f: Objective, inputs: Sequence[Tensor], h: float = 1e-5) -> float:
    """
    Compare reverse-mode gradients with (f(x+h) - f(x-h)) / 2h.

    Args:
        f: Zero-argument objective returning the scalar loss and a closure
           that runs the backward pass for that evaluation.
        inputs: Tensors to differentiate with respect to. They are
           perturbed in place and restored afterwards.
        h: Finite-difference step.

    Returns:
        Maximum element-wise relative error |a - n| / max(|a| + |n|, 1e-5).
    """
    for tensor in inputs:
        tensor.grad = None
    value, backward = f()
    if not math.isfinite(float(value)):
        raise GradCheckError(f"objective evaluated to {value}")
    backward()
    analytic = [
        np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs
    ]

    worst = 0.0
    for tensor, grad in zip(inputs, analytic):
        flat = tensor.data.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = _evaluate(f)
            flat[i] = original - h
            minus = _evaluate(f)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            denom = max(abs(flat_grad[i]) + abs(numeric), 1e-5)
            worst = max(worst, abs(flat_grad[i] - numeric) / denom)
    return worst
