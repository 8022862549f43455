"""Exception types shared across the toolkit."""


class LyaptrackError(Exception):
    """Base class for all toolkit errors."""


class ContractViolationError(LyaptrackError):
    """An argument violates a call contract (dimension mismatch, bad range)."""


class InputError(LyaptrackError):
    """An input contains non-finite entries."""


class ModelDefinitenessError(LyaptrackError):
    """The inertia matrix failed a symmetry or positive-definiteness check."""


class GainValidationError(LyaptrackError):
    """Controller gains are invalid (lambda <= 0, P not SPD, ...)."""


class CertificateValidityError(LyaptrackError):
    """The composite certificate is not well defined (P*M not symmetric)."""


class DivergenceError(LyaptrackError):
    """A simulation produced a non-finite or unbounded state."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class InsufficientDataError(LyaptrackError):
    """Too few usable samples for the requested estimate."""


class SpecValidationError(LyaptrackError):
    """A reference trajectory specification is invalid."""


class ConfigError(LyaptrackError):
    """An experiment config file failed parsing or validation."""
