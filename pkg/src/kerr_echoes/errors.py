"""Exception types shared across the simulation modules."""


class NumericalToleranceError(RuntimeError):
    """A monitored numerical quantity (norm, trace, Hermiticity, ...) drifted
    past its allowed bound."""


class TruncationError(NumericalToleranceError):
    """The Fock-space cutoff is too small for the requested state."""


class TruncationWarning(UserWarning):
    pass
