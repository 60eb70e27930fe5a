"""Shared numeric constants and guard errors."""
from __future__ import annotations

DEFAULT_BUDGET = 2**22


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration would exceed the configured path budget."""


class RealityError(ArithmeticError):
    """Raised when a quantity that must be real carries a non-negligible imaginary part."""


def check_budget(count: int, budget: int, what: str = "path lattice") -> None:
    if count > budget:
        raise BudgetExceeded(
            f"{what} needs {count} combinations, budget is {budget}; raise --budget to override"
        )
