# app/errors.py


class BisimError(Exception):
    """Base class for every library error; `code` is a stable identifier."""

    code = "ERROR"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def as_report(self):
        return {"Error": str(self), "Code": self.code}


class UnvalidatedError(BisimError):
    code = "UNVALIDATED"


class UnknownStateError(BisimError):
    code = "UNKNOWN_STATE"


class BudgetExceeded(BisimError):
    code = "BUDGET_EXCEEDED"


class SupportTooLarge(BisimError):
    code = "SUPPORT_TOO_LARGE"


class NotVisibly(BisimError):
    code = "NOT_VISIBLY"


class NotPoca(BisimError):
    code = "NOT_POCA"


class NotVpda(BisimError):
    code = "NOT_VPDA"


class NotPvpda(BisimError):
    code = "NOT_PVPDA"


class FrontierError(BisimError):
    code = "FRONTIER"


class ShapeError(BisimError):
    code = "SHAPE"


class MalformedCertificate(BisimError):
    code = "MALFORMED_CERTIFICATE"


class RedefinedError(BisimError):
    code = "REDEFINED"


class FormatError(BisimError):
    """Text-format problem; carries the 1-based line number when known."""

    code = "PARSE"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, line=line)
        self.line = line


class UsageError(BisimError):
    code = "USAGE"
