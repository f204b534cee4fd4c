"""Exception types shared across the package.

The CLI maps these onto exit codes: InputError -> 2, BudgetExceededError -> 3,
AuditFailure -> 4.  ConsistencyError signals an internal invariant violation
(a broken clique tree or a predicate referencing a vertex outside its clique)
and is always a bug, never bad user input.
"""


class InputError(ValueError):
    """Malformed or out-of-range user input (files, windows, parameters)."""


class ConsistencyError(RuntimeError):
    """Internal structural invariant violated (bug, not user error)."""


class BudgetExceededError(RuntimeError):
    """Predicted work exceeds the configured budget; refuse to run."""

    def __init__(self, predicted, budget):
        self.predicted = predicted
        self.budget = budget
        super().__init__(
            f"predicted summation count {predicted:,} exceeds budget {budget:,.0f}; "
            "re-run with a larger budget or --force"
        )


class AuditFailure(RuntimeError):
    """A numerical audit (oracle or Monte Carlo comparison) failed."""
