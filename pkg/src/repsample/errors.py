"""Exception types raised across the package.

Everything derives from :class:`SamplingError` (itself a ``ValueError``) so the
CLI can map any data problem to exit code 2 with a single ``except``.
"""

from __future__ import annotations


class SamplingError(ValueError):
    """Base class for all data and precondition errors."""


class DuplicateId(SamplingError):
    def __init__(self, unit_id: int):
        self.unit_id = unit_id
        super().__init__(f"duplicate unit id {unit_id}")


class FieldOutOfRange(SamplingError):
    def __init__(self, field: str, value: object):
        self.field = field
        self.value = value
        super().__init__(f"field {field!r} out of range: {value!r}")


class EmptyInput(SamplingError):
    pass


class DegenerateBox(SamplingError):
    pass


class PoleLatitude(SamplingError):
    pass


class MalformedRow(SamplingError):
    def __init__(self, line_no: int, reason: str, source: str | None = None):
        self.line_no = line_no
        self.reason = reason
        self.source = source
        where = f"{source}:{line_no}" if source else f"line {line_no}"
        super().__init__(f"{where}: {reason}")


class MissingColumn(SamplingError):
    def __init__(self, name: str, source: str | None = None):
        self.name = name
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"missing column {name!r}{where}")


class UnsupportedOrder(SamplingError):
    pass


class TooFewPoints(SamplingError):
    pass


class NonPositiveArea(SamplingError):
    pass


class ZeroMeanDistance(SamplingError):
    pass


class ZeroMeanMul(SamplingError):
    pass


class InsufficientCandidates(SamplingError):
    pass


class TooFewSamples(SamplingError):
    pass


class ExhaustedCandidates(SamplingError):
    pass


class NonPositiveTemperature(SamplingError):
    pass


class ShapeMismatch(SamplingError):
    pass


class DegenerateAgreement(SamplingError):
    pass


class EmptyInstance(SamplingError):
    pass
