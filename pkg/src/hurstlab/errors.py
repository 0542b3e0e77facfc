"""Exception hierarchy.

Every error raised on a domain condition derives from :class:`HurstLabError`
so the CLI can map them to exit code 1.
"""


class HurstLabError(Exception):
    """Base class for domain errors."""


class DomainError(HurstLabError, ValueError):
    pass


class MomentConditionViolated(HurstLabError, ValueError):
    pass


class DegenerateFilter(HurstLabError, ValueError):
    pass


class PathTooShort(HurstLabError, ValueError):
    pass


class DegenerateSpec(HurstLabError, ValueError):
    pass


class NotPositiveDefinite(HurstLabError, ArithmeticError):
    pass


class MissingSeed(HurstLabError, ValueError):
    pass


class EmptyNeighborhood(HurstLabError, ValueError):
    pass


class DegenerateVariations(HurstLabError, ArithmeticError):
    pass


class SingularWeightMatrix(HurstLabError, ArithmeticError):
    pass


class NonPositiveDefiniteLagCov(HurstLabError, ArithmeticError):
    pass


class OutOfTableRange(HurstLabError, ValueError):
    pass
