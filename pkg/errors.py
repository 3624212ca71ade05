"""
Exception hierarchy for the SAGE toolkit
File: errors.py
"""

from typing import Any, Optional


class SageError(Exception):
    """Base class for every error raised by this package"""


# Representation documents

class DocumentError(SageError):
    """A scenario/objective document could not be accepted"""

    def __init__(self, message: str, path: str = "$", line: Optional[int] = None):
        self.message = message
        self.path = path
        self.line = line
        where = f"{path}" if line is None else f"{path} (line {line})"
        super().__init__(f"{where}: {message}")


class DocumentSyntaxError(DocumentError):
    """Malformed JSON"""


class SchemaError(DocumentError):
    """Well-formed JSON violating the document schema or its invariants"""


# Generator boundary

class GeneratorError(SageError):
    """Base class for text-generator failures"""

    iteration: Optional[int] = None


class MissingSlot(GeneratorError):
    pass


class EmptyDefectList(GeneratorError):
    pass


class FixtureMiss(GeneratorError):
    pass


class BackendTimeout(GeneratorError):
    pass


class BackendRefusal(GeneratorError):
    pass


class PayloadParseError(GeneratorError):
    def __init__(self, message: str, start: int = 0, end: int = 0):
        self.start = start
        self.end = end
        super().__init__(f"{message} (bytes {start}-{end})")


# Verification

class UnknownMetric(SageError):
    """Slicing was asked about a metric with no recorder"""


class PredicateParseError(SageError):
    pass


class UnknownMetricError(SageError):
    """A compiled predicate references a metric the program does not record"""


class MissingMetric(SageError):
    pass


class SeriesLengthMismatch(SageError):
    pass


# Simulation

class RuntimeFault(SageError):
    def __init__(self, step: int, object_name: str, activity: str, reason: str):
        self.step = step
        self.object_name = object_name
        self.activity = activity
        self.reason = reason
        super().__init__(f"step {step}, {object_name}.{activity}: {reason}")


# Patching, pipeline, evaluation, configuration

class PatchError(SageError):
    pass


class PreconditionError(SageError):
    pass


class InnerRepairExhausted(SageError):
    def __init__(self, message: str, outcome: Any = None):
        self.outcome = outcome
        super().__init__(message)


class InvalidWeights(SageError):
    pass


class ConfigError(SageError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"invalid config '{key}': {message}")
