"""Exception hierarchy shared by all magspec modules."""


class MagspecError(Exception):
    """Base class for every error raised by magspec."""


# geometry
class RayMiss(MagspecError):
    pass


class NonConvex(MagspecError):
    pass


class Degenerate(MagspecError):
    pass


class CriticalPoint(MagspecError):
    pass


class ResolutionTooCoarse(MagspecError):
    pass


# forms
class OpenPath(MagspecError):
    pass


class NotClosed(MagspecError):
    pass


class SolverFail(MagspecError):
    pass


# closed_form
class BoxTooSmall(MagspecError):
    pass


# discretize
class MetricNotSPD(MagspecError):
    pass


class MissingLink(MagspecError):
    pass


class EmptyDomain(MagspecError):
    pass


class Disconnected(MagspecError):
    pass


# eigensolve
class NoConvergence(MagspecError):
    def __init__(self, iterations, worst_residual, spectrum=None):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(worst residual {worst_residual:.3e})"
        )
        self.iterations = iterations
        self.worst_residual = worst_residual
        self.spectrum = spectrum


class ZeroVector(MagspecError):
    pass


# bounds
class MissingLambda11(MagspecError):
    pass


class NotSimplyConnected(MagspecError):
    pass


# cli
class ConfigError(MagspecError):
    pass


class OracleUnavailable(MagspecError):
    pass
