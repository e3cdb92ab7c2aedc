"""Error types shared across the package.

Every domain error carries a stable ``code`` string so the command line
can map it to an exit status without inspecting messages.
"""


class TanglemeterError(Exception):
    """Base class for domain errors."""

    code = "DOMAIN_ERROR"

    def __init__(self, message="", **details):
        super().__init__(message or self.code)
        self.details = details


class DimensionError(TanglemeterError, ValueError):
    code = "DIMENSION"


class NotUnitNormalized(TanglemeterError, ValueError):
    code = "NOT_UNIT_NORMALIZED"


class VacuumZero(TanglemeterError):
    code = "VACUUM_ZERO"


class SingularFactorization(TanglemeterError):
    code = "SINGULAR_FACTORIZATION"


class NonConverged(TanglemeterError):
    code = "NONCONVERGED"


class IllConditioned(TanglemeterError):
    code = "ILL_CONDITIONED"


class Degenerate(TanglemeterError):
    code = "DEGENERATE"


class Ambiguous(TanglemeterError):
    code = "AMBIGUOUS"


class NotInGenericOrbit(TanglemeterError):
    code = "NOT_IN_GENERIC_ORBIT"


class UnsupportedForm(TanglemeterError):
    code = "UNSUPPORTED_FORM"
