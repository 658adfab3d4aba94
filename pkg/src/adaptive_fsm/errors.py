"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Invalid or mismatched Hilbert-space dimension."""


class FsmConditionError(ValueError):
    """A coefficient set does not satisfy the Fisher-symmetric conditions."""


class FsmConstructionError(RuntimeError):
    """The built-in FSM construction failed its own verification."""


class SingularFiducialError(ValueError):
    """The classical Fisher information is singular at the fiducial state."""


class DegenerateInversionError(ArithmeticError):
    """The analytic two-FSM inversion has no usable solution for a0."""


class GridError(ValueError):
    """An infidelity grid cannot support the scaling regression."""
