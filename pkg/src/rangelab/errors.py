"""Shared exception types."""


class InvalidDistributionError(ValueError):
    """A step distribution violates its invariants (dimension mismatch,
    nonpositive or non-normalized probabilities, duplicate atoms)."""


class BudgetExceededError(RuntimeError):
    """An exact computation would exceed its configured budget.

    Exact oracles refuse rather than silently approximate; the report says
    what would have been required.
    """

    def __init__(self, message: str, required: int, budget: int):
        super().__init__(f"{message}: requires {required:,}, budget {budget:,}")
        self.required = required
        self.budget = budget
