"""Error and signal types shared across the package.

Signals (contact, limit point, remesh) are exceptional control-flow events
raised by the solvers and caught by the coupling layer; errors are genuine
failures that should reach the caller.
"""


class PullinLabError(Exception):
    """Base class for all package errors."""


class ConfigError(PullinLabError):
    """A configuration document could not be used."""


class ParseError(ConfigError):
    """Structural problem in a config document (bad syntax, unknown or
    mistyped field). The message names the offending field."""


class ValidationError(ConfigError):
    """A parsed value is non-physical (e.g. negative gap)."""


class ContactSignal(PullinLabError):
    """The deformed beam touches the counter-electrode (local gap <= 0)."""

    def __init__(self, min_gap: float):
        self.min_gap = min_gap
        super().__init__(f"beam contacts counter-electrode (min gap {min_gap:.3e} m)")


class LimitPointSignal(PullinLabError):
    """The structural tangent stiffness lost positive definiteness.

    Carries the last iterate so the caller can inspect the state."""

    def __init__(self, displacement=None):
        self.displacement = displacement
        super().__init__("tangent stiffness not positive definite (limit point)")


class NonConvergenceError(PullinLabError):
    """An iterative solve exhausted its iteration budget.

    Carries the last iterate so the caller can inspect the state."""

    def __init__(self, displacement=None, iterations: int = 0):
        self.displacement = displacement
        self.iterations = iterations
        super().__init__(f"no convergence after {iterations} iterations")


class RemeshSignal(PullinLabError):
    """Mesh morphing produced an inverted or degenerate element."""

    def __init__(self, min_area: float):
        self.min_area = min_area
        super().__init__(f"morphed mesh degenerate (min signed area {min_area:.3e})")


class NumericalError(PullinLabError):
    """A linear-algebra operation failed (singular or indefinite system)."""


class FieldSolverError(PullinLabError):
    """The field solve failed numerically (e.g. ill-conditioned system)."""


class CapacitanceUndefinedError(PullinLabError):
    """Capacitance requested for a zero-voltage solution."""


class NoPullInError(PullinLabError):
    """The voltage sweep converged everywhere; no pull-in inside the range."""


class ExtractionError(PullinLabError):
    """Lumped-parameter extraction lacks usable sweep points."""
