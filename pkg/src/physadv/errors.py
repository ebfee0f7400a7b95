"""Exception types raised across the package."""


class PhysAdvError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PhysAdvError, ValueError):
    pass


class NonFiniteEntries(PhysAdvError, ValueError):
    pass


class IndexOutOfBounds(PhysAdvError, IndexError):
    pass


class DegenerateConstraint(PhysAdvError):
    """The constraint matrix has full column rank: only the zero perturbation is valid."""


class EmptyConstraint(PhysAdvError):
    """The constraint matrix has rank zero: every variable is independent."""


class SingularSystem(PhysAdvError, ValueError):
    pass


class RankDeficientH(PhysAdvError, ValueError):
    pass


class InvalidSpec(PhysAdvError, ValueError):
    pass


class MalformedFile(PhysAdvError, ValueError):
    pass


class EmptyDataset(PhysAdvError, ValueError):
    pass


class InvalidCase(PhysAdvError, ValueError):
    pass


class GenerationStall(PhysAdvError, RuntimeError):
    """Rejection sampling ran out of retries before meeting the constraints."""


class InvariantBreach(PhysAdvError, RuntimeError):
    """A harness run produced an example that breaks a hard invariant."""
