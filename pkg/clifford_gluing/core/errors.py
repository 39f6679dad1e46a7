"""
Exception hierarchy for the toolkit.

Each error carries the process exit code the CLI maps it to:
- 2: invalid input (bad parameters, violated preconditions)
- 3: internal or numerical failure (divergence, broken invariants)
"""


class CliffordGluingError(Exception):
    exit_code = 3


class InvalidArgumentError(CliffordGluingError, ValueError):
    exit_code = 2


class SingularParameterError(InvalidArgumentError):
    """Raised when a Weierstrass parameter sits on one of the punctures."""


class MTooSmallError(InvalidArgumentError):
    """Raised when the straightening radius does not clear the wing onset radius."""


class InvariantUndefinedError(InvalidArgumentError):
    """Raised when the alignment invariant is requested outside its parity regime."""


class EquivarianceViolationError(InvalidArgumentError):
    """Raised when a strip forcing is not odd under the two reflections."""


class NewtonDivergenceError(CliffordGluingError):
    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class InsufficientSamplesError(CliffordGluingError):
    pass


class ClosureOverflowError(CliffordGluingError):
    pass


class SeamMismatchError(CliffordGluingError):
    pass


class NonWatertightError(CliffordGluingError):
    pass


class DegenerateParametrizationError(CliffordGluingError):
    pass


class NearSingularError(CliffordGluingError):
    pass


class GraphOverlapError(CliffordGluingError):
    pass


class NoRootError(CliffordGluingError):
    pass
