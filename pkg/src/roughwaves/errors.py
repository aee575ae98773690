"""Exception hierarchy.

Numerical failures and contract violations get distinct types so the CLI
can map them to exit codes (config problems -> 2, numerics -> 3).
"""
from __future__ import annotations


class RoughwavesError(Exception):
    """Base class for all errors raised by this package."""


class AssumptionError(RoughwavesError):
    """A model ingredient violates its structural assumptions
    (velocity not concave/decreasing, kernel not normalized, ...)."""


class DomainError(RoughwavesError):
    """An argument is outside the admissible domain (density not in [0,1],
    flux level above the branch maximum, ...)."""


class FluxMismatchError(RoughwavesError):
    """The pair (rho_minus, rho_plus) does not satisfy the flux constraint
    kappa_minus*f(rho_minus) = kappa_plus*f(rho_plus)."""


class AmbiguousCaseError(RoughwavesError):
    """An asymptotic state sits on (or too close to) the stagnation density,
    or the two speed factors coincide, so the case letter/digit is undefined."""


class TraceError(RoughwavesError):
    """A requested interface trace is outside the admissible range for the
    case being built."""


class RootSolveError(RoughwavesError):
    """A bracketed scalar solve failed to converge."""


class BlowupError(RoughwavesError):
    """Backward marching left the physical range: no root of the nodal
    equation exists in (0, 1].  Carries the node position in .x."""

    def __init__(self, msg: str, x: float | None = None):
        super().__init__(msg)
        self.x = x


class SeedError(RoughwavesError):
    """The tail seed collapsed back to the constant state, so the marched
    profile never develops a front."""


class WindowError(RoughwavesError):
    """An averaging window leaves the stored grid and no padding value was
    supplied."""


class SchemeError(RoughwavesError):
    """The finite-volume update produced an out-of-range state or was asked
    to run with an unstable time step."""


class ConfigError(RoughwavesError):
    """A scenario file is malformed or inconsistent.  Carries the offending
    key in .key when known."""

    def __init__(self, msg: str, key: str | None = None):
        super().__init__(msg)
        self.key = key


class ArtifactError(RoughwavesError):
    """A required output artifact is missing or inconsistent with the run
    manifest."""
