"""Exception hierarchy.

Two branches matter for the CLI exit codes: ``ValidationError`` (bad inputs,
exit code 2) and ``NumericalError`` (a computation that could not be carried
out, exit code 3).
"""


class TreeLassoError(Exception):
    """Base class for all package errors."""


class ValidationError(TreeLassoError):
    """Invalid user input or inconsistent arguments."""


class NumericalError(TreeLassoError):
    """A numerical procedure failed or did not converge."""


# --- tree construction -----------------------------------------------------

class CycleDetected(ValidationError):
    """The edge set contains a directed cycle."""


class MultipleParents(ValidationError):
    """A node has more than one incoming edge."""

    def __init__(self, label):
        super().__init__(f"node {label!r} has more than one parent")
        self.label = label


class UnknownLabel(ValidationError):
    """An edge endpoint does not refer to a declared node."""


class DuplicateLabel(ValidationError):
    """Node labels are not distinct."""


class ZeroWeightEdge(ValidationError):
    """An edge weight is zero or not finite."""


class InvalidLevels(ValidationError):
    """Requested binary tree depth is less than one."""


class NonpositiveSd(ValidationError):
    """A column standard deviation is zero or negative."""


class CovarianceNotPD(NumericalError):
    """Sample covariance is not positive definite."""


# --- solvers ---------------------------------------------------------------

class NegativeAlpha(ValidationError):
    """Penalty mixing weight must be nonnegative."""


class DimensionMismatch(ValidationError):
    """Array shapes are inconsistent."""


class MaxIterations(NumericalError):
    """Iteration limit reached before convergence."""


class InfeasibleSystem(NumericalError):
    """The linear system defining the penalty dual has no solution."""


# --- model selection / simulation -----------------------------------------

class NonpositiveSigma(ValidationError):
    """Noise variance must be positive."""


class DegenerateResidual(NumericalError):
    """Residual sum of squares is zero where a variance estimate is needed."""


class UnknownScenario(ValidationError):
    """Requested simulation scenario is not in the registry."""


class EmptySupport(ValidationError):
    """The support set for the alignment diagnostic is empty."""


# --- file I/O --------------------------------------------------------------

class TreeFileError(ValidationError):
    """A tree file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LabelMismatch(ValidationError):
    """Data columns do not match the tree's node labels."""


class MissingValues(ValidationError):
    """The data table contains missing entries."""
