"""
SkIn - Cost Curve Fitting
Quadratic least squares for extrapolation and log-log scaling exponents.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from ..errors import DomainError, SingularFitError


@dataclass(frozen=True)
class QuadFit:
    """y ≈ c0 + c1·L + c2·L²."""
    c0: float
    c1: float
    c2: float
    residual: float

    def predict(self, length: float) -> float:
        return self.c0 + self.c1 * length + self.c2 * length * length

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def quad_fit(points: Sequence[Tuple[float, float]]) -> QuadFit:
    """
    Least squares over the basis {1, L, L²} via the normal equations.

    L is scaled to [0, 1] before forming VᵀV and one step of iterative
    refinement is applied, so exactly quadratic data is recovered to
    rounding error.
    """
    if len(points) < 3:
        raise SingularFitError(f"quadratic fit needs >= 3 points, got {len(points)}")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if len(np.unique(xs)) < 3:
        raise SingularFitError("quadratic fit needs >= 3 distinct lengths")

    scale = float(np.max(np.abs(xs)))
    u = xs / scale
    basis = np.stack([np.ones_like(u), u, u * u], axis=1)
    gram = basis.T @ basis
    try:
        coef = np.linalg.solve(gram, basis.T @ ys)
        coef = coef + np.linalg.solve(gram, basis.T @ (ys - basis @ coef))
    except np.linalg.LinAlgError as e:
        raise SingularFitError(f"normal equations are singular ({e})")

    residual = float(np.linalg.norm(basis @ coef - ys))
    return QuadFit(
        c0=float(coef[0]),
        c1=float(coef[1] / scale),
        c2=float(coef[2] / (scale * scale)),
        residual=residual,
    )


def scaling_exponent(samples: Sequence[Tuple[float, float]]) -> float:
    """
    Slope of ln(y) against ln(L) over the largest decade of L.

    Args:
        samples: (L, y) pairs with increasing L; at least four.
    """
    if len(samples) < 4:
        raise DomainError(f"scaling exponent needs >= 4 samples, got {len(samples)}")
    xs = np.array([s[0] for s in samples], dtype=np.float64)
    ys = np.array([s[1] for s in samples], dtype=np.float64)
    if np.any(np.diff(xs) <= 0):
        raise DomainError("samples must have strictly increasing L")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("scaling exponent needs positive L and y")
    window = xs >= xs[-1] / 10.0
    if window.sum() < 2:
        window = np.ones_like(xs, dtype=bool)
    slope, _ = np.polyfit(np.log(xs[window]), np.log(ys[window]), 1)
    return float(slope)
