"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A configuration value violates a model or controller invariant.

    ``key`` is the dotted configuration key that failed (``"thigh.mass"``).
    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class ParseError(ValueError):
    """Configuration file could not be parsed."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class DegenerateFrame(ValueError):
    """Contact frame undefined because the foot sits on the gantry axis."""


class SingularMass(ArithmeticError):
    """Augmented mass matrix is numerically singular."""


class SingularKKT(ArithmeticError):
    """Constrained (stance or impact) block system is rank deficient."""


class SimulationError(RuntimeError):
    """Base class for failures raised by the hybrid integrator.

    The partially recorded trace is attached as ``trace`` when available.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalFailure(SimulationError):
    """Integrator step size underflowed or the solver diverged."""


class ConstraintDrift(SimulationError):
    """Stance velocity constraint residual grew beyond its limit."""
