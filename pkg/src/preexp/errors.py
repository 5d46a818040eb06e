"""Exception types shared across the toolkit."""


class PreexpError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PreexpError):
    """Syntax or structural error in program / expression text."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class EvaluationError(PreexpError):
    """Error raised while evaluating an expression or running a program."""


class GuardRangeError(EvaluationError):
    """A probabilistic guard evaluated outside [0, 1]."""


class NonNegativityError(EvaluationError):
    """A post-expectation required to be non-negative evaluated below zero."""


class InvalidPairError(EvaluationError):
    """A pair (first, witness) violated |first| <= witness at some state."""


class LimitUndetectedError(PreexpError):
    """A sequence required to stabilize did not do so within its budget."""


class CertificateError(PreexpError):
    """A certificate precondition is violated (e.g. an infinite witness bound)."""
