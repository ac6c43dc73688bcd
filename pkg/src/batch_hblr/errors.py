"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to, so the front end never has to
guess.
"""


class HBLRError(Exception):
    exit_code = 2


class InvalidInputError(HBLRError, ValueError):
    exit_code = 2


class ContractViolation(InvalidInputError):
    """Array shapes or dimensions disagree."""


class InvalidParameterError(InvalidInputError):
    pass


class SchemaError(InvalidInputError):
    pass


class ParseError(InvalidInputError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ModelFileError(HBLRError):
    exit_code = 2


class NumericalFailure(HBLRError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, model_index=None, sweep=None):
        ctx = []
        if sweep is not None:
            ctx.append(f"sweep {sweep}")
        if model_index is not None:
            ctx.append(f"model {model_index}")
        if ctx:
            message = f"{message} [{', '.join(ctx)}]"
        super().__init__(message)
        self.model_index = model_index
        self.sweep = sweep
