"""Exception hierarchy shared by all modules."""


class GameError(Exception):
    """Base class for every error raised by zsgames."""


class InvalidExponents(GameError, ValueError):
    pass


class DegenerateExponents(GameError, ValueError):
    pass


class NotPositiveDefinite(GameError, ValueError):
    pass


class SingularSystem(GameError, ArithmeticError):
    pass


class NonFiniteEvaluation(GameError, ArithmeticError):
    pass


class NonFiniteState(GameError, ArithmeticError):
    pass


class NonFiniteValue(GameError, ArithmeticError):
    pass


class UnstableParameters(GameError, ValueError):
    pass


class OrderingViolated(GameError, AssertionError):
    """A comparison that a monotone scheme must preserve was broken.

    ``node`` is a dict with the indices and coordinates of the worst offender and
    ``excess`` the amount by which the sub-solution exceeded the super-solution.
    """

    def __init__(self, message, node=None, excess=None):
        super().__init__(message)
        self.node = node
        self.excess = excess


class OutsideValidityWindow(GameError, ValueError):
    pass


class NonPositiveWeights(GameError, ValueError):
    pass


class TruncationTooSmall(GameError, RuntimeError):
    pass
