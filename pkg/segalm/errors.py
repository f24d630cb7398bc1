"""
Exception types raised across the library.
"""
from typing import List, Optional


class SegaLMError(Exception):
    """Base class for every error the library raises on purpose."""


# Vocabulary and tokenization

class MissingSpecialToken(SegaLMError, ValueError):
    """Vocab file lacks one of the required special tokens."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Vocab is missing required special token {name}")


class DuplicateToken(SegaLMError, ValueError):
    """A vocab entry appears on more than one line."""

    def __init__(self, line: int, token: Optional[str] = None):
        self.line = line
        self.token = token
        super().__init__(f"Duplicate vocab entry {token!r} at line {line}")


class EmptyVocab(SegaLMError, ValueError):
    """Vocab file has no entries."""


class UnknownSurface(SegaLMError, KeyError):
    """A subtoken surface is not an entry of the vocab in use."""

    def __init__(self, surface: str):
        self.surface = surface
        super().__init__(f"Surface {surface!r} is not in this vocab")


# Example building and persistence

class EmptySequence(SegaLMError, ValueError):
    """A segment handed to a builder has no tokens."""


class EmptyQuestion(SegaLMError, ValueError):
    """A span example has an empty question."""


class AnswerOutOfWindow(SegaLMError, ValueError):
    """The gold answer does not fit inside the packed window."""

    def __init__(self, start: int, end: int, window: int):
        self.start = start
        self.end = end
        self.window = window
        super().__init__(f"Answer tokens [{start}, {end}] fall outside the {window}-token window")


class VocabMismatch(SegaLMError, ValueError):
    """Example file was written with a different vocab."""

    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(f"Example file vocab hash {found[:12]} does not match vocab {expected[:12]}")


class CorruptRecord(SegaLMError, ValueError):
    """Example file is truncated or holds an invalid record."""

    def __init__(self, offset: int, reason: str = "truncated record"):
        self.offset = offset
        self.reason = reason
        super().__init__(f"Corrupt example file at byte offset {offset}: {reason}")


# Model

class IndexOutOfTable(SegaLMError, IndexError):
    """A position index exceeds its embedding table."""

    def __init__(self, table: str, index: int, size: int):
        self.table = table
        self.index = index
        self.size = size
        super().__init__(f"Index {index} out of range for {table} table of size {size}")


class AllMasked(SegaLMError, ValueError):
    """A query row has no visible key."""


class ShapeMismatch(SegaLMError, ValueError):
    """Tensor shapes disagree with the model configuration."""


class SchemeMismatch(SegaLMError, ValueError):
    """Checkpoint was trained with a different position scheme."""

    def __init__(self, checkpoint_scheme: str, requested_scheme: str):
        self.checkpoint_scheme = checkpoint_scheme
        self.requested_scheme = requested_scheme
        super().__init__(
            f"Checkpoint uses scheme {checkpoint_scheme!r} but {requested_scheme!r} was requested"
        )


# Training

class NoEligiblePositions(SegaLMError, ValueError):
    """Example holds only special tokens and padding."""


class NoLabels(SegaLMError, ValueError):
    """Loss requested over a batch with no labeled position."""


class NonFiniteGradient(SegaLMError, FloatingPointError):
    """A gradient holds NaN or infinity; the update was aborted."""

    def __init__(self, parameter: str, step: int):
        self.parameter = parameter
        self.step = step
        super().__init__(f"Non-finite gradient in {parameter} at step {step}")


class NoContextPositions(SegaLMError, ValueError):
    """Span head has no context position to choose from."""


# Configuration

class ConfigError(SegaLMError, ValueError):
    """Run configuration failed validation; lists every violation."""

    def __init__(self, violations: List[str]):
        self.violations = violations
        joined = "\n  - ".join(violations)
        super().__init__(f"Invalid configuration ({len(violations)} problem(s)):\n  - {joined}")
