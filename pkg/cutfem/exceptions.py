class CutFemError(Exception):
    """Base class for every error raised by the solver."""

    exit_code = 1


class ConfigurationError(CutFemError):
    """Bad input from the user: flags, case files, expressions."""

    exit_code = 2


class ComputationError(CutFemError):
    """A fatal geometric or algebraic failure during a computation."""

    exit_code = 1


class ConfigInvalid(ConfigurationError):
    pass


class UnknownCase(ConfigurationError):
    pass


class ExpressionParseError(ConfigurationError):
    pass


class MissingField(ConfigurationError):
    pass


class DegenerateElement(ComputationError):
    pass


class NonManifold(ComputationError):
    pass


class NonFinite(ComputationError):
    pass


class EmptyRule(ComputationError):
    pass


class MeshMismatch(ComputationError):
    pass


class InactiveElement(ComputationError):
    pass


class MissingDirichletData(ComputationError):
    pass


class SingularMatrix(ComputationError):
    pass


class NoConvergence(ComputationError):
    pass


class DegenerateConstraint(ComputationError):
    pass


class InclusionViolated(ComputationError):
    """The previous solution is undefined somewhere on the new domain."""


class NoExactSolution(ComputationError):
    pass


class NonPositiveError(ComputationError):
    pass


class IndexOutOfRange(ComputationError):
    pass


class TimestepRestrictionWarning(UserWarning):
    """Delta t exceeds the discrete coercivity bound; the step is still taken."""
