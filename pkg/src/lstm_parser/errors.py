"""Exception hierarchy shared by every part of the parser."""


class ParserError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ParserError, ValueError):
    pass


class ContractError(ParserError, RuntimeError):
    """A caller broke an operation's precondition."""


class NonFiniteError(ParserError, FloatingPointError):
    pass


class InvalidTreeError(ParserError, ValueError):
    pass


class OracleError(ParserError):
    """No transition sequence reproduces the gold tree."""


class ConllFormatError(ParserError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFormatError(ParserError):
    """A model file could not be loaded."""
