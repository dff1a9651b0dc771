"""Exception hierarchy shared by all tplots modules."""


class TPlotError(Exception):
    """Base class for every error raised by tplots."""


class StructuralError(TPlotError, ValueError):
    """Inputs whose shapes, ids or references do not line up."""


class RoutingError(TPlotError):
    """A routing could not be built (unreachable pair, bridge edge, ...)."""


class UnsupportedModeError(TPlotError):
    """The operation is not defined for this kind of network or T-Set."""


class MissingMomentTableError(TPlotError, LookupError):
    """A Monte Carlo moment table is needed but has not been computed."""


class EnumerationLimitError(TPlotError):
    """Exhaustive enumeration was requested above the configured size limit."""


class AllocationError(TPlotError, ValueError):
    """A capacity allocation is infeasible or did not converge."""
