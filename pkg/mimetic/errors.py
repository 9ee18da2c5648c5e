"""
Exceptions raised by the mimetic package.

Every error derives from MimeticError so callers (the command line front-end
in particular) can separate usage problems from compute failures.
"""


class MimeticError(Exception):
    def __init__(self, error):
        Exception.__init__(self, error)
        self._error = error

    def __str__(self):
        return str(self._error)


class BasisError(MimeticError):
    """
    Invalid polynomial degree or basis index.
    """


class MeshError(MimeticError):
    """
    Invalid mesh description or an operation the complex cannot provide.
    """


class DomainError(MimeticError):
    """
    Points requested outside the meshed box.
    """


class FieldError(MimeticError):
    """
    An analytic field produced non-finite values or the wrong shape.
    """


class BoundaryConditionError(MimeticError):
    def __init__(self, error, imbalance=None):
        MimeticError.__init__(self, error)
        self.imbalance = imbalance


class SolverError(MimeticError):
    def __init__(self, error, location=None, residual=None):
        MimeticError.__init__(self, error)
        self.location = location
        self.residual = residual


class ConvergenceError(MimeticError):
    def __init__(self, error, report=None):
        MimeticError.__init__(self, error)
        self.report = report


class ConfigurationError(MimeticError):
    """
    Invalid case configuration; the command line reports it as a usage error.
    """
