"""Fixed-width machine integer semantics.

Every program fixes one bit width for all of its variables (default 8,
supported range 4..32).  Unsigned variables wrap around modulo ``2**width``;
signed variables use two's complement.  Values are stored canonically as bit
patterns in ``[0, 2**width)``; interpretation (for comparisons and division)
depends on the signedness of the expression, which is unsigned as soon as
any unsigned variable occurs in it and signed otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast as A

MIN_WIDTH = 4
MAX_WIDTH = 32
DEFAULT_WIDTH = 8


class EvalFault(Exception):
    """Raised for division by zero; callers treat the transition as blocked."""


@dataclass(frozen=True)
class SymbolTable:
    """Declared variables with their signedness, plus the global bit width."""

    width: int = DEFAULT_WIDTH
    signs: dict[str, bool] = field(default_factory=dict)  # name -> is_signed

    def __post_init__(self) -> None:
        if not MIN_WIDTH <= self.width <= MAX_WIDTH:
            raise ValueError(f"width {self.width} outside {MIN_WIDTH}..{MAX_WIDTH}")

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.signs)

    def declares(self, name: str) -> bool:
        return name in self.signs

    def is_signed(self, name: str) -> bool:
        return self.signs[name]

    def with_width(self, width: int) -> "SymbolTable":
        return SymbolTable(width, dict(self.signs))

    def extended(self, extra: dict[str, bool]) -> "SymbolTable":
        merged = dict(self.signs)
        merged.update(extra)
        return SymbolTable(self.width, merged)

    def wrap(self, value: int) -> int:
        return value & self.mask

    def interp(self, pattern: int, signed: bool) -> int:
        """Interpret a canonical bit pattern as a Python integer."""
        if signed and pattern >= 1 << (self.width - 1):
            return pattern - (1 << self.width)
        return pattern

    def bounds(self, signed: bool) -> tuple[int, int]:
        if signed:
            half = 1 << (self.width - 1)
            return -half, half - 1
        return 0, self.mask


def expr_is_signed(e: A.Expr, symtab: SymbolTable) -> bool:
    """An expression is unsigned as soon as it mentions an unsigned variable."""
    for name in A.free_vars(e):
        if symtab.declares(name) and not symtab.is_signed(name):
            return False
    return True


def trunc_div(a: int, b: int) -> int:
    """C-style division truncating toward zero (callers exclude b == 0)."""
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q
