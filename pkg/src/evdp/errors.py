"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class BudgetMismatch(ValueError):
    """Two privacy budgets cannot be combined as requested."""


class MechanismUndefined(RuntimeError):
    """The requested noise mechanism does not exist for these parameters.

    Raised, for instance, when the biased Laplace scale would be >= 1, or when
    a pure-DP Laplace release asks for epsilon <= sensitivity.
    """
