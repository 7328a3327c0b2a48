"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code; see cli.EXIT_CODES.
"""


class KgpilotError(Exception):
    """Base class for all package errors."""


class ConfigError(KgpilotError):
    """A configuration file or parameter set cannot be used."""


class ParameterError(KgpilotError):
    """An operation received an argument outside its admissible range."""


class OutOfDomainError(KgpilotError):
    """A spatial query point lies outside the usable grid interior."""


class DivergenceError(KgpilotError):
    """The field solver produced a non-finite or runaway value."""

    def __init__(self, message, node=None, step=None):
        super().__init__(message)
        self.node = node
        self.step = step


class LightConeBreachError(KgpilotError):
    """The particle reached the grid boundary region: the grid was undersized."""


class CalibrationError(KgpilotError):
    """Forcing calibration failed (e.g. zero forcing amplitude)."""

    def __init__(self, message, phi_char=0.0):
        super().__init__(message)
        self.phi_char = phi_char


class ArchiveError(KgpilotError):
    """An ensemble archive is missing, corrupt, or of an unsupported version."""


class DataError(KgpilotError):
    """Inputs to an analysis routine are inconsistent (grid mismatch, empty ensemble)."""
