"""Errors and warnings raised by the solvers and the command-line harness."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class TruncationTooLarge(ValueError):
    """Requested more basis states than the eigensystem holds."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical stage."""


class ConvergenceFailure(NumericalError):
    """The tridiagonal eigensolver hit its iteration cap."""


class BasisIncomplete(NumericalError):
    """An initial state is not spanned by the supplied eigenbasis."""


class NoGrowthWindow(NumericalError):
    """No interval of sustained exponential growth was found in a series."""


class NoClassicalSolution(NumericalError):
    """A classical search ended without the requested equilibrium or bifurcation."""


class ResolutionWarning(UserWarning):
    """Upper part of a computed spectrum is influenced by the box walls or the grid."""


class TruncationWarning(UserWarning):
    """Matrix-element truncation is too small for the requested level."""
