"""
Exception classes
"""


class IsopatchError(Exception):
    category = "error"
    exit_code = 1

    def __init__(self, message: str) -> None:
        super().__init__(message)


class ParameterError(IsopatchError, ValueError):
    category = "parameter"
    exit_code = 2


class PreconditionError(IsopatchError, ValueError):
    category = "precondition"
    exit_code = 2


class BasisIndexError(IsopatchError, IndexError):
    category = "index"
    exit_code = 2


class DomainError(IsopatchError, ValueError):
    category = "domain"
    exit_code = 3

    def __init__(self, xi: float, lo: float, hi: float) -> None:
        super().__init__(
            f"Parametric coordinate {xi!r} outside of the knot vector domain [{lo!r}, {hi!r}]"
        )


class DegenerateConfigurationError(IsopatchError, ArithmeticError):
    category = "degenerate"
    exit_code = 3


class SingularMappingError(IsopatchError, ArithmeticError):
    category = "geometry"
    exit_code = 3


class ContractError(IsopatchError):
    category = "contract"
    exit_code = 1


class AssemblyError(IsopatchError):
    category = "assembly"
    exit_code = 4


class PreallocationViolation(AssemblyError):
    def __init__(self, row: int, col: int) -> None:
        super().__init__(
            f"Insertion at ({row}, {col}) falls outside of the preallocated pattern"
        )


class ConvergenceError(IsopatchError):
    category = "solver"
    exit_code = 5

    def __init__(self, message: str, report=None) -> None:
        super().__init__(message)
        self.report = report


class PatchFileError(IsopatchError):
    category = "patch-file"
    exit_code = 6
