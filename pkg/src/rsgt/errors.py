"""Exception hierarchy.

Everything raised on bad input derives from ``ValidationError`` (CLI exit
code 2); resource problems derive from ``ResourceError`` (exit code 3).
"""


class RsgtError(Exception):
    pass


class ValidationError(RsgtError, ValueError):
    pass


class ResourceError(RsgtError):
    pass


class DomainError(ValidationError):
    pass


class PlanError(ValidationError):
    pass


class GroupSizeExceedsPopulation(PlanError):
    def __init__(self, stage: int, s: int, n: int):
        self.stage, self.s, self.n = stage, s, n
        super().__init__(f"stage {stage}: group size {s} exceeds population size {n}")


class NonPositiveParameter(PlanError):
    def __init__(self, stage: int, field: str, value):
        self.stage, self.field, self.value = stage, field, value
        super().__init__(f"stage {stage}: {field} must be a positive integer, got {value!r}")


class ArityMismatch(PlanError):
    pass


class RValueRequired(PlanError):
    pass


class RValueForbidden(PlanError):
    pass


class WeightArityMismatch(ValidationError):
    pass


class AssignmentMismatch(ValidationError):
    def __init__(self, stage: int, detail: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {detail}")


class EmptyOutcomes(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class ZeroExpected(ValidationError):
    pass


class UnsortedGrid(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


class BudgetExceeded(ResourceError):
    def __init__(self, needed: int, cap: int):
        self.needed, self.cap = needed, cap
        super().__init__(f"search needs {needed} evaluations, cap is {cap}")
