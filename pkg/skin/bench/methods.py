"""
SkIn - Benchmark Methods
How each method splits a length-L input, and its modeled attention cost.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

from ..encoder import EncoderConfig, attention_cost
from ..errors import ConfigurationError


class Method(Enum):
    BERT = "bert"
    SLIDE_WINDOW = "slidewindow"
    SKIN_INVARIABLE = "skin-invariable"
    SKIN_VARIABLE = "skin-variable"

    @classmethod
    def parse(cls, name: str) -> "Method":
        for method in cls:
            if method.value == name:
                return method
        raise ConfigurationError(
            f"unknown bench method '{name}' (choose from {', '.join(m.value for m in cls)})"
        )


@dataclass(frozen=True)
class Layout:
    """Segment geometry of one method at one length (n=1 for a single full pass)."""
    n: int
    l: int

    @property
    def key_len(self) -> int:
        return self.l + self.l // 2

    def longest_input(self, method: "Method") -> int:
        """Longest encoder input in content tokens."""
        if method is Method.BERT:
            return self.l
        if method is Method.SLIDE_WINDOW:
            return self.l
        return max(self.l, self.key_len)


def layout_for(method: Method, length: int, segment_count: int, segment_length: int) -> Layout:
    """
    Derive (n, l) for a method at total length L.

    Invariable segmentation and the sliding window keep n fixed (l = L/n);
    variable segmentation keeps l fixed (n = L/l).
    """
    if length < 1:
        raise ConfigurationError(f"length must be >= 1, got {length}")
    if method is Method.BERT:
        return Layout(n=1, l=length)
    if method is Method.SLIDE_WINDOW:
        if length % segment_count:
            raise ConfigurationError(
                f"{method.value}: L={length} not divisible by n={segment_count}"
            )
        return Layout(n=segment_count, l=length // segment_count)
    if method is Method.SKIN_INVARIABLE:
        if length % (4 * segment_count):
            raise ConfigurationError(
                f"{method.value}: L={length} must be a multiple of 4·n = {4 * segment_count}"
            )
        return Layout(n=segment_count, l=length // segment_count)
    if method is Method.SKIN_VARIABLE:
        if length % segment_length or length // segment_length < 2:
            raise ConfigurationError(
                f"{method.value}: L={length} must be a multiple of l={segment_length} with n >= 2"
            )
        return Layout(n=length // segment_length, l=segment_length)
    raise ConfigurationError(f"unhandled method {method}")


def validate_lengths(
    method: Method, lengths: Sequence[int], segment_count: int, segment_length: int
) -> None:
    """Reject lengths a method cannot split, listing the valid ones among them."""
    bad: List[int] = []
    good: List[int] = []
    for length in lengths:
        try:
            layout_for(method, length, segment_count, segment_length)
            good.append(length)
        except ConfigurationError:
            bad.append(length)
    if bad:
        raise ConfigurationError(
            f"{method.value}: invalid lengths {bad}; valid among requested: {good or 'none'}"
        )


@dataclass(frozen=True)
class ModeledCost:
    """Analytic per-document element counts (content tokens, specials excluded)."""
    skim_quadratic: int
    intensive_quadratic: int
    linear: int

    @property
    def quadratic(self) -> int:
        return self.skim_quadratic + self.intensive_quadratic


def modeled_cost(
    method: Method,
    length: int,
    lite: EncoderConfig,
    strong: EncoderConfig,
    segment_count: int,
    segment_length: int,
) -> ModeledCost:
    """
    Attention-score and activation elements for one document of length L.

    For SkIn the skim term covers n lite passes over l tokens and the
    intensive term one strong pass over the 1.5·l key window.
    """
    layout = layout_for(method, length, segment_count, segment_length)
    if method is Method.BERT:
        cost = attention_cost(strong, length)
        return ModeledCost(0, cost.quadratic, cost.linear)
    if method is Method.SLIDE_WINDOW:
        cost = attention_cost(strong, layout.l)
        return ModeledCost(0, layout.n * cost.quadratic, layout.n * cost.linear)
    skim = attention_cost(lite, layout.l)
    intensive = attention_cost(strong, layout.key_len)
    return ModeledCost(
        skim_quadratic=layout.n * skim.quadratic,
        intensive_quadratic=intensive.quadratic,
        linear=layout.n * skim.linear + intensive.linear,
    )
