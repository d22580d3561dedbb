"""Exception hierarchy shared by every shiftlab module."""

from __future__ import annotations


class ShiftlabError(Exception):
    """Base class for all errors raised by shiftlab."""


class ShapeMismatch(ShiftlabError):
    pass


class NotHermitian(ShiftlabError):
    pass


class NotPSD(ShiftlabError):
    pass


class Singular(ShiftlabError):
    """Raised by ``invert``; ``witness`` is a nonzero kernel vector (exact mode)."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class NotPerfectSquare(ShiftlabError):
    pass


class OutOfRange(ShiftlabError):
    pass


class SpecInvalid(ShiftlabError):
    pass


class SpecMismatch(ShiftlabError):
    pass


class NonOrthonormalImages(ShiftlabError):
    def __init__(self, message: str, pair=None):
        super().__init__(message)
        self.pair = pair


class PreconditionFailed(ShiftlabError):
    pass


class DefectNotFinite(PreconditionFailed):
    pass


class NotCertifiedHyponormalContraction(PreconditionFailed):
    pass


class NotLeftInvertible(PreconditionFailed):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class KernelNotFinitelySupported(PreconditionFailed):
    pass


class InternalInconsistency(ShiftlabError):
    """A proven identity failed on computed data; never a user error."""


class ParseError(ShiftlabError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        loc = f"{line}:{column}"
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(f"{loc}: {message}")


class ShapeError(ShiftlabError):
    def __init__(self, message: str, trace=()):
        self.trace = tuple(trace)
        if self.trace:
            message = f"{message} [in {' > '.join(self.trace)}]"
        super().__init__(message)
