"""Exception taxonomy shared across the toolkit.

Fatal conditions raise; recoverable conditions (depth exhaustion, shaky
convergence) travel as flags on evaluation outcomes instead.
"""


class SepconError(Exception):
    """Base class for all toolkit-specific failures."""


class DimensionMismatch(SepconError, ValueError):
    pass


class PointOutsideDomain(SepconError, ValueError):
    pass


class UnboundedExpression(SepconError, ArithmeticError):
    pass


class UnknownGallery(SepconError, KeyError):
    pass


class MissingLipschitzBound(SepconError, ValueError):
    pass


class ScheduleUnsound(SepconError, ValueError):
    pass


class CoverGap(SepconError, ValueError):
    """The normalizing hat sum vanishes somewhere on the domain."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class InconsistentValues(SepconError, ValueError):
    pass


class NotProjectivelyHomeomorphic(SepconError, ValueError):
    pass


class InjectivityRejected(SepconError, ValueError):
    """Carries a concrete colliding parameter pair as ``witness``."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class PatchNotInjective(SepconError, ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class TruncationTooCoarse(SepconError, ValueError):
    pass


class BudgetExceeded(SepconError, RuntimeError):
    pass


class ParseError(SepconError, ValueError):
    pass
