"""Exception hierarchy for the thermo_run framework.

Input problems subclass ``ValueError`` so callers that only know about the
standard library still catch them. Domain rejections carry a JSON-ready
``payload`` (for example the witness cycles of a Birkhoff range) that the CLI
writes next to the error message.
"""


class ThermoRunError(Exception):
    """Base class for every error raised by thermo_run."""


class InvalidShiftError(ThermoRunError, ValueError):
    """Transition matrix or potential does not describe a subshift of finite type."""


class IncompatibleMeasureError(ThermoRunError, ValueError):
    """Markov measure does not live on the given shift space."""


class NotMixingError(ThermoRunError, ValueError):
    """Transition matrix is not primitive."""


class InvalidCarpetError(ThermoRunError, ValueError):
    """Carpet system violates positivity, domination or nondegeneracy."""


class EnumerationGuardError(ThermoRunError):
    """A brute-force enumeration would exceed the configured guard."""


class ConvergenceError(ThermoRunError):
    """An iterative method failed to converge within its budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DomainRejection(ThermoRunError, ValueError):
    """The hypotheses of an operation fail for the given data."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


class AlphaOutsideRangeError(DomainRejection):
    """Constraint value lies outside or on the boundary of I_psi."""


class DegenerateRangeError(DomainRejection):
    """All cycle means of psi coincide, so I_psi is a single point."""


class InfeasibleGridError(DomainRejection):
    """No grid point satisfies the constraint at the requested resolution."""


class SchemaError(ThermoRunError, ValueError):
    """Input document does not match the published schema."""

    def __init__(self, message, pointer=''):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or '/'


class ConfigError(ThermoRunError, ValueError):
    """Settings file or command-line override cannot be used."""
