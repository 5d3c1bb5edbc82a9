"""Exception hierarchy.

``InputError`` subclasses describe bad files, bad topologies, or bad
configuration and map to CLI exit code 1. ``AnalysisError`` subclasses are
raised while computing subsets and map to exit code 2.
"""


class CritMetricsError(Exception):
    """Base class for every error raised by this package."""


class InputError(CritMetricsError):
    pass


class ParseError(InputError):
    pass


class AlignmentError(InputError):
    pass


class TopologyError(InputError):
    pass


class CycleError(TopologyError):
    pass


class RootError(TopologyError):
    pass


class TraceError(InputError):
    """A trace does not walk the supplied topology."""


class UnknownMetricError(InputError):
    def __init__(self, missing):
        self.missing = sorted(str(m) for m in missing)
        super().__init__("unknown metrics: " + ", ".join(self.missing))


class SizeCapError(InputError):
    pass


class SpecError(InputError):
    pass


class AnalysisError(CritMetricsError):
    pass


class LengthMismatchError(AnalysisError):
    pass


class UnresolvedPivotError(AnalysisError):
    pass


class ZeroSupportError(AnalysisError):
    pass


class PathExplosionError(AnalysisError):
    pass


class EmptyLabelError(AnalysisError):
    pass
