"""Exception types raised across the package."""

from __future__ import annotations


class AttnForecastError(Exception):
    """Base class; the CLI maps these to exit status 2."""


class MissingStream(AttnForecastError):
    pass


class FormatError(AttnForecastError):
    pass


class ValidationError(AttnForecastError):
    def __init__(self, message: str, t: float | None = None):
        self.t = t
        if t is not None:
            message = f"{message} (t={t!r})"
        super().__init__(message)


class OutOfField(AttnForecastError):
    pass


class MapsAbsent(AttnForecastError):
    pass


class MissingData(AttnForecastError):
    pass


class WindowOutOfRange(AttnForecastError):
    pass


class SingleClass(AttnForecastError):
    pass


class TooFewParticipants(AttnForecastError):
    pass


class DegenerateData(AttnForecastError):
    pass


class SchemaMismatch(AttnForecastError):
    pass


class LengthMismatch(AttnForecastError):
    pass


class ConfigError(AttnForecastError):
    pass


class OutOfRange(AttnForecastError):
    pass
