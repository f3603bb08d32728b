"""
SkIn - Losses
Label smoothing and the L2 weight penalty.
"""

from typing import Dict

import numpy as np

from ..errors import ConfigurationError, ValidationError
from ..ndtensor import Tensor


def smooth_labels(label: int, num_classes: int, gamma: float, normalize: bool = False) -> Tensor:
    """
    Smoothed target vector.

    The default rule replaces 1 with 1-γ and every 0 with γ, without
    renormalizing (the sum is 1 + (U-2)γ). With `normalize`, the
    conventional (1-γ)·onehot + γ/U is returned instead.
    """
    if not 0 <= label < num_classes:
        raise ValidationError(f"label {label} outside [0, {num_classes})")
    if not 0.0 <= gamma < 0.5:
        raise ConfigurationError(f"label smoothing γ must be in [0, 0.5), got {gamma}")
    if normalize:
        target = np.full(num_classes, gamma / num_classes)
        target[label] += 1.0 - gamma
    else:
        target = np.full(num_classes, gamma)
        target[label] = 1.0 - gamma
    return Tensor(target)


def is_regularized(name: str) -> bool:
    """Weight matrices and embedding tables; biases and layer-norm parameters are excluded."""
    return name.endswith(".weight")


def l2_penalty(params: Dict[str, Tensor], r_l2: float) -> float:
    """
    r·Σ‖θ‖² over weights; adds 2·r·θ to each weight's gradient.

    Parameters are visited in sorted-name order.
    """
    if r_l2 < 0:
        raise ConfigurationError(f"r_L2 must be >= 0, got {r_l2}")
    total = 0.0
    for name in sorted(params):
        if not is_regularized(name):
            continue
        theta = params[name]
        total += float(np.sum(theta.data * theta.data))
        theta.accumulate_grad(2.0 * r_l2 * theta.data)
    return r_l2 * total
