"""Exception types shared across the package."""


class TentkitError(Exception):
    pass


class MeshFormatError(TentkitError):
    """Raised by the mesh loader; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class InvariantViolation(TentkitError):
    """A mesh (or other structure) failed one of its named invariants."""

    def __init__(self, invariant, message):
        super().__init__("%s: %s" % (invariant, message))
        self.invariant = invariant


class EmptyReadySet(TentkitError):
    pass


class StalledFront(TentkitError):
    """Ready set empty while some vertex is below the slab top."""


class CausalityViolation(TentkitError):
    """Mapped state inversion left the admissible region."""


class NonPhysicalState(TentkitError):
    """Gas state with nonpositive density or temperature."""


class NonFiniteState(TentkitError):
    """NaN or inf appeared in a solution vector."""


class SingularStageMatrix(TentkitError):
    """Implicit stage system is singular (causality too aggressive)."""
