"""Exception hierarchy.

``InputError`` subclasses describe bad files or configuration (CLI exit 2);
``NumericError`` subclasses describe numerically degenerate inputs to the
geometry kernel or the models (CLI exit 3).
"""


class CohortGeomError(Exception):
    pass


class InputError(CohortGeomError, ValueError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(InputError):
    pass


class DataQualityError(InputError):
    pass


class NumericError(CohortGeomError, ArithmeticError):
    pass


class DegenerateCurveError(NumericError):
    pass


class ModelError(NumericError):
    pass
