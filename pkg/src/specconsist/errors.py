"""Exception types shared across the toolkit."""


class SpecConsistError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SpecConsistError):
    """Invalid STFT or run configuration."""


class DegenerateWindowError(ConfigError):
    """Window whose shifted-square sum vanishes somewhere; no dual window exists."""


class InputError(SpecConsistError):
    """Operation precondition violated by the caller's data."""


class DivergenceError(SpecConsistError):
    """Solver produced a non-finite loss. Carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MetricError(SpecConsistError):
    """Metric undefined for the given input (e.g. zero reference)."""


class AudioFormatError(SpecConsistError):
    """Unsupported or malformed audio file."""
