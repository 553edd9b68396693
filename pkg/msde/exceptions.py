"""
.. module:: exceptions
   :platform: Unix, MacOSX
   :synopsis: error hierarchy shared by all msde modules

"""


class MsdeError(Exception):
    """Base class for every error raised by msde."""
    pass


class DomainError(MsdeError, ValueError):
    """An argument lies outside the domain of the operation."""
    pass


class TruncationError(MsdeError):
    """The hard cap was reached before the model mass tolerance was met."""

    def __init__(self, message, achieved_mass, cap):
        super().__init__(message)
        self.achieved_mass = achieved_mass
        self.cap = cap


class UndefinedDivergence(MsdeError):
    """A cell with zero mass meets a negative exponent (the "--" cells)."""

    def __init__(self, message, cell=None, alpha=None, lam=None):
        super().__init__(message)
        self.cell = cell
        self.alpha = alpha
        self.lam = lam


class NonConvergence(MsdeError):
    """No seed of the multi-start solver met the gradient tolerance."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class DegenerateInformation(MsdeError):
    """J is not positive, the sandwich variance does not exist."""
    pass


class DataFormatError(MsdeError):
    """Input file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        if line is not None:
            message = "{}:{}: {}".format(path, line, message)
        super().__init__(message)
        self.path = path
        self.line = line


class EmptyDataset(MsdeError):
    """The input holds no observation."""
    pass


class SimulationError(MsdeError):
    """Every replicate of a simulation plan failed."""
    pass


class CrossCheckWarning(UserWarning):
    """Two independent formulas for the same quantity disagree."""
    pass
