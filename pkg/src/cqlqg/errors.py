"""Exception hierarchy for the cqlqg package."""


class CQLQGError(Exception):
    """Base class for all package errors."""


class ShapeError(CQLQGError, ValueError):
    pass


class NotHurwitz(CQLQGError):
    pass


class Unstable(NotHurwitz):
    """Raised when a quantity needs a stable closed loop and it is not."""


class SingularOperator(CQLQGError):
    pass


class SingularLyapunov(SingularOperator):
    pass


class SingularLeadingPair(CQLQGError):
    pass


class GradeMismatch(CQLQGError):
    pass


class NotSelfAdjointPair(CQLQGError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"pair {index} is neither jointly symmetric nor antisymmetric")


class ParityViolation(CQLQGError):
    pass


class CostFormMismatch(CQLQGError):
    pass


class AffineMismatch(CQLQGError):
    pass


class ChainRuleMismatch(CQLQGError):
    pass


class NotSymplectic(CQLQGError):
    pass


class ValidationError(CQLQGError):
    """Plant data violates a structural requirement."""


class OddDimension(ValidationError):
    pass


class RankDeficientD(ValidationError):
    pass


class RankDeficientD0(ValidationError):
    pass


class NoStabilizingSolution(CQLQGError):
    pass


class InitializationFailed(CQLQGError):
    pass


class EvaluationFailed(CQLQGError):
    pass
