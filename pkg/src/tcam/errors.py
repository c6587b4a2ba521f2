"""Exception and warning types shared across the package.

Errors split into two families so the command line can map them onto exit
codes: :class:`InputError` (bad files, names, parameters) and
:class:`NumericalError` (a fit or transform that cannot be carried out).
"""


class TcamError(Exception):
    """Base class for all package errors."""


class InputError(TcamError, ValueError):
    """Input data or parameters failed validation."""


class NumericalError(TcamError, ArithmeticError):
    """A numerical routine could not produce a result."""


class GraphError(TcamError, ValueError):
    pass


class CycleError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class NodeMismatchError(InputError):
    pass


class UnknownColumnError(InputError):
    pass


class DuplicatePositionError(InputError):
    pass


class PipelineOrderError(InputError):
    pass


class SingularBasisError(NumericalError):
    pass


class DegenerateFoldError(NumericalError):
    pass


class ZeroVarianceError(NumericalError):
    pass


class NonConvergenceWarning(UserWarning):
    pass


class OrphanChildWarning(UserWarning):
    pass
