"""Exception hierarchy shared by all qcml modules.

Exit-code mapping used by the CLI: ConfigError -> 1, precondition/domain
failures -> 2, solver/undecidable failures -> 3.
"""


class QcmlError(Exception):
    """Base class for all qcml errors."""


class ConfigError(QcmlError):
    """Invalid CLI configuration or schema violation (exit code 1)."""


class DomainError(QcmlError):
    """Argument outside an operation's domain (exit code 2)."""


class ExtrapolationError(DomainError):
    """Tabulated gauge evaluated outside its sample hull."""


class BelowRangeError(DomainError):
    """Gauge inversion requested below the value at 1."""


class HypothesisError(DomainError):
    """An analytic hypothesis required by the operation fails."""


class UnsupportedKindError(DomainError):
    """No closed form is available for the requested gauge kind."""


class GeometryError(DomainError):
    """Snake construction produced an invalid (non-simple) boundary."""


class SolverError(QcmlError):
    """Convex solve failed to bracket or converge (exit code 3)."""


class SolveError(SolverError):
    """Linear system iteration failed to reach the residual target."""


class IntegrationError(SolverError):
    """Adaptive quadrature failed to converge to tolerance."""


class UndecidableError(SolverError):
    """Convergence trend could not be classified within the horizon."""


class NoCrossoverError(SolverError):
    """Lower bound never exceeds the upper bound in the given regime."""


class SamplingError(SolverError):
    """Adaptive argument sampling could not bound the increments."""


class InconsistentKError(DomainError):
    """Supplied quasiconformality constant below the measured distortion."""


class SingularityError(DomainError):
    """Radial profile derivative vanishes where it must not."""
