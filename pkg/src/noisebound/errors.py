"""Exception types. Every error carries a stable ``code`` string."""


class NoiseboundError(Exception):
    code = "ERR"


class RateSyntaxError(NoiseboundError):
    code = "ERR_SYNTAX"

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class SelfDependenceError(NoiseboundError):
    code = "ERR_SELF_DEPENDENCE"


class BadIndexError(NoiseboundError):
    code = "ERR_BAD_INDEX"


class NegativeRateError(NoiseboundError):
    code = "ERR_NEGATIVE_RATE"


class NonFiniteRateError(NoiseboundError):
    code = "ERR_NONFINITE"


class UnboundedRateError(NoiseboundError):
    code = "ERR_UNBOUNDED"


class StateSpaceTooLargeError(NoiseboundError):
    code = "ERR_STATE_SPACE_TOO_LARGE"


class NoConvergenceError(NoiseboundError):
    code = "ERR_NO_CONVERGENCE"

    def __init__(self, iterations, residual):
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class DegenerateError(NoiseboundError):
    code = "ERR_DEGENERATE"


class ZeroProbabilityError(NoiseboundError):
    code = "ERR_ZERO_PROBABILITY"


class NotCertifiedError(NoiseboundError):
    code = "ERR_NOT_CERTIFIED"


class NotOrderedError(NoiseboundError):
    code = "ERR_NOT_ORDERED"


class NonmonotoneError(NoiseboundError):
    code = "ERR_NONMONOTONE"


class JumpCapError(NoiseboundError):
    code = "ERR_JUMP_CAP"
