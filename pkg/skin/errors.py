"""
SkIn - Error Types
One hierarchy for every failure the library raises.
"""

from typing import Optional, Sequence


class SkinError(Exception):
    """Base class for all SkIn errors."""


class DimensionError(SkinError, ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, op: str, *shapes: Sequence[int]):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        rendered = " and ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class EmptyInputError(SkinError, ValueError):
    """An operation received an empty input."""


class NonFiniteError(SkinError, ArithmeticError):
    """A NaN or Inf value was produced."""


class ContractError(SkinError):
    """A caller broke an API precondition."""


class ConfigurationError(SkinError, ValueError):
    """Invalid configuration value or combination."""


class VocabError(SkinError, ValueError):
    """A token id is outside the vocabulary."""


class SequenceLengthError(SkinError, ValueError):
    """A sequence is longer than the encoder supports."""


class DatasetError(SkinError, ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SkinError, ValueError):
    """A value failed a domain check (e.g. label out of range)."""


class GradCheckError(SkinError):
    """Finite-difference evaluation produced a non-finite value."""


class TrainingDivergedError(SkinError):
    """Loss became non-finite during training."""

    def __init__(self, stage: str, step: int, detail: str = ""):
        self.stage = stage
        self.step = step
        message = f"training diverged in {stage} at step {step}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class CheckpointError(SkinError):
    """A checkpoint is missing or unreadable."""


class CheckpointMismatchError(CheckpointError):
    """A checkpoint holds a different model kind than requested."""

    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(f"checkpoint holds a '{found}' model, expected '{expected}'")


class SingularFitError(SkinError, ArithmeticError):
    """Regression normal equations are rank deficient."""


class DomainError(SkinError, ValueError):
    """A value lies outside the function's domain."""


class BenchError(SkinError):
    """A benchmark could not be run or summarized."""
