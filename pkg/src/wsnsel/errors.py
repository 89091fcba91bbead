"""Exception hierarchy for the pipeline."""


class WsnError(Exception):
    """Base class for all errors raised by wsnsel."""


class ContractError(WsnError, ValueError):
    """A precondition of an operation was violated."""


class DimensionError(ContractError):
    pass


class EmptyDatasetError(WsnError):
    pass


class ParseError(WsnError, ValueError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class WindowError(WsnError, IndexError):
    pass


class UnderdeterminedError(ContractError):
    """Too few rows to fit the requested number of attributes."""


class FoldTooSmallError(ContractError):
    pass
