"""Exception hierarchy shared by every folio module.

Input problems (bad files, invalid vectors) derive from :class:`InputError`;
parameter combinations outside the regime where a guarantee applies derive
from :class:`ParameterRegimeError` and carry the violated inequality.
"""

from __future__ import annotations

from typing import Any


class FolioError(Exception):
    """Base class for all folio errors."""


class InputError(FolioError, ValueError):
    """Invalid data or arguments supplied by the caller."""


class ConfigError(InputError):
    pass


# --- market ---


class NonPositivePriceError(InputError):
    def __init__(self, row: int, col: int, value: float) -> None:
        super().__init__(f"non-positive price {value!r} at row {row}, column {col}")
        self.row = row
        self.col = col
        self.value = value


class RMinViolationError(InputError):
    pass


class UnsupportedKindError(InputError):
    pass


class CsvParseError(InputError):
    def __init__(self, row: int, col: int, text: str) -> None:
        super().__init__(f"cannot parse {text!r} as a price at row {row}, column {col}")
        self.row = row
        self.col = col
        self.text = text


class RaggedRowsError(InputError):
    def __init__(self, row: int, detail: str = "") -> None:
        message = f"row {row} has a different number of fields than the header"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.row = row


class EmptyFileError(InputError):
    pass


# --- sampler ---


class NegativeEntryError(InputError):
    pass


class ZeroVectorError(InputError):
    pass


class NotNormalizedError(InputError):
    pass


class InvalidSError(InputError):
    pass


# --- updates / estimators ---


class NonPositiveITildeError(InputError):
    pass


class NonPositiveZTildeError(InputError):
    pass


class ZeroInnerProductError(InputError):
    pass


class ZTildeOutOfRangeError(InputError):
    pass


class NonFiniteObjectiveError(FolioError):
    pass


# --- parameter regimes ---


class ParameterRegimeError(FolioError):
    """A guarantee's precondition does not hold for the requested parameters."""

    def __init__(self, inequality: str, **values: Any) -> None:
        rendered = ", ".join(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}"
                             for key, value in values.items())
        super().__init__(f"parameter regime violated: requires {inequality} ({rendered})")
        self.inequality = inequality
        self.values = values


class EpsExceedsXMinError(ParameterRegimeError):
    pass


class EpsIExceedsRMinError(ParameterRegimeError):
    pass


class EpsZTooLargeError(ParameterRegimeError):
    pass


class EpsITooLargeError(ParameterRegimeError):
    pass


class DeltaOutOfRangeError(ParameterRegimeError):
    pass
