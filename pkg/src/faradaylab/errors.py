"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`FaradayError`.
The CLI maps :class:`ConfigurationError` to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class FaradayError(Exception):
    pass


class ConfigurationError(FaradayError, ValueError):
    """Invalid parameters, counts, shapes or config documents."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class ContractError(FaradayError, ValueError):
    """A documented precondition of an operation was violated."""


class NumericalError(FaradayError, ArithmeticError):
    """Base for failures of the numerics themselves."""


class FlatteningDegenerate(NumericalError):
    """The flattening map stopped being a diffeomorphism (J too small)."""

    def __init__(self, min_jacobian, floor, state=None):
        self.min_jacobian = min_jacobian
        self.floor = floor
        self.state = state
        super().__init__(
            f"flattening degenerate: min J = {min_jacobian:.6g} <= floor {floor:.6g}"
        )


class ConditioningError(NumericalError):
    """A per-mode linear system was singular or badly conditioned."""

    def __init__(self, message, mode=None):
        self.mode = mode
        if mode is not None:
            message = f"{message} (mode m1={mode[0]}, m2={mode[1]})"
        super().__init__(message)


class SolvabilityError(NumericalError):
    """Data violates a compatibility condition of an elliptic problem."""


class SingularOperatorError(NumericalError):
    pass
