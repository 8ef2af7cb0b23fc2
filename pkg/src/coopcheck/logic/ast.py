"""Expression trees shared by the language frontend, analyses and witnesses.

Arithmetic expressions (AExp) are built from integer literals, variables,
unary minus and the binary operators ``+ - * /``.  Boolean expressions (BExp)
are comparisons over AExp plus ``! && || ==>`` and the literals
``true``/``false``.  All nodes are immutable and compare structurally.

Constant folding (used by :func:`is_trivial`) applies exactly these rules:

* arithmetic on two integer literals is folded in unbounded precision,
* comparisons between integer literals fold to ``true``/``false`` when this
  is width independent (equal values always; unequal values only when both
  lie in ``[0, 8)``, which is representable and distinct for every supported
  width and signedness),
* reflexive comparisons on structurally equal, division-free operands fold
  (``e == e`` / ``e <= e`` / ``e >= e`` to ``true``; ``!=``/``<``/``>`` to
  ``false``),
* the usual boolean identities (``!true``, ``true && b``, ``false || b``,
  ``b ==> true``, ...).

Anything else is left untouched; in particular no width-dependent arithmetic
identity (such as ``x+1 > x``) is ever folded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")

# Distinct literal values below this bound are distinct in every supported
# width/signedness combination (narrowest supported type: signed 4-bit).
_FOLDABLE_LITERAL_BOUND = 8


@dataclass(frozen=True)
class IntLit:
    value: int

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Neg:
    operand: "AExp"

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "AExp"
    right: "AExp"

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class BoolLit:
    value: bool

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Cmp:
    op: str
    left: "AExp"
    right: "AExp"

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Not:
    operand: "BExp"

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class And:
    left: "BExp"
    right: "BExp"

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Or:
    left: "BExp"
    right: "BExp"

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Implies:
    left: "BExp"
    right: "BExp"

    def __str__(self) -> str:
        return to_source(self)


AExp = Union[IntLit, Var, Neg, BinOp]
BExp = Union[BoolLit, Cmp, Not, And, Or, Implies]
Expr = Union[AExp, BExp]

TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conjoin(parts: list[BExp]) -> BExp:
    """Right-fold a (possibly empty) list of conjuncts into one expression."""
    if not parts:
        return TRUE
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = And(p, result)
    return result


def disjoin(parts: list[BExp]) -> BExp:
    if not parts:
        return FALSE
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = Or(p, result)
    return result


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

# Higher binds tighter.  Comparison operands are printed tight (``n == x+y``)
# which matches the concrete syntax used inside witness documents.
_PREC = {
    Implies: 1,
    Or: 2,
    And: 3,
    Not: 4,
    Cmp: 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
    Neg: 8,
}
_ATOM_PREC = 9


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    return _PREC.get(type(e), _ATOM_PREC)


def _child(e: Expr, parent_prec: int, allow_equal: bool) -> str:
    text = to_source(e)
    child_prec = _prec(e)
    if child_prec < parent_prec or (child_prec == parent_prec and not allow_equal):
        return f"({text})"
    return text


def to_source(e: Expr) -> str:
    """Render an expression in the C-like concrete syntax."""
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _child(e.operand, _PREC[Neg], True)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        return f"{_child(e.left, p, True)}{e.op}{_child(e.right, p, False)}"
    if isinstance(e, Cmp):
        p = _PREC[Cmp]
        return f"{_child(e.left, p + 1, True)} {e.op} {_child(e.right, p + 1, True)}"
    if isinstance(e, Not):
        return f"!({to_source(e.operand)})"
    if isinstance(e, And):
        p = _PREC[And]
        return f"{_child(e.left, p, True)} && {_child(e.right, p, False)}"
    if isinstance(e, Or):
        p = _PREC[Or]
        return f"{_child(e.left, p, True)} || {_child(e.right, p, False)}"
    if isinstance(e, Implies):
        p = _PREC[Implies]
        return f"{_child(e.left, p, False)} ==> {_child(e.right, p, True)}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (IntLit, BoolLit, Var)):
        return ()
    if isinstance(e, (Neg, Not)):
        return (e.operand,)
    return (e.left, e.right)


def walk(e: Expr) -> Iterator[Expr]:
    """Yield every node of the tree, parents before children."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(children(node))


def free_vars(e: Expr) -> frozenset[str]:
    return frozenset(n.name for n in walk(e) if isinstance(n, Var))


def contains_division(e: Expr) -> bool:
    return any(isinstance(n, BinOp) and n.op == "/" for n in walk(e))


def atoms(e: BExp) -> list[BExp]:
    """Collect the comparison leaves of a boolean expression, in order."""
    found: list[BExp] = []

    def visit(node: Expr) -> None:
        if isinstance(node, Cmp):
            found.append(node)
        elif isinstance(node, (Not, And, Or, Implies)):
            for c in children(node):
                visit(c)

    visit(e)
    out: list[BExp] = []
    seen: set[str] = set()
    for a in found:
        key = to_source(a)
        if key not in seen:
            seen.add(key)
            out.append(a)
    return out


def substitute(e: Expr, var: str, by: AExp) -> Expr:
    """Replace every occurrence of ``var`` by ``by`` (expressions bind nothing,
    so the substitution is trivially capture free)."""
    if isinstance(e, Var):
        return by if e.name == var else e
    if isinstance(e, (IntLit, BoolLit)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, var, by))
    if isinstance(e, Not):
        return Not(substitute(e.operand, var, by))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, var, by), substitute(e.right, var, by))
    if isinstance(e, Cmp):
        return Cmp(e.op, substitute(e.left, var, by), substitute(e.right, var, by))
    if isinstance(e, And):
        return And(substitute(e.left, var, by), substitute(e.right, var, by))
    if isinstance(e, Or):
        return Or(substitute(e.left, var, by), substitute(e.right, var, by))
    if isinstance(e, Implies):
        return Implies(substitute(e.left, var, by), substitute(e.right, var, by))
    raise TypeError(f"not an expression node: {e!r}")


def apply_store(e: Expr, store: Mapping[str, AExp]) -> Expr:
    """Simultaneous substitution of every variable that has a store entry."""
    if isinstance(e, Var):
        return store.get(e.name, e)
    if isinstance(e, (IntLit, BoolLit)):
        return e
    if isinstance(e, Neg):
        return Neg(apply_store(e.operand, store))
    if isinstance(e, Not):
        return Not(apply_store(e.operand, store))
    if isinstance(e, BinOp):
        return BinOp(e.op, apply_store(e.left, store), apply_store(e.right, store))
    if isinstance(e, Cmp):
        return Cmp(e.op, apply_store(e.left, store), apply_store(e.right, store))
    if isinstance(e, And):
        return And(apply_store(e.left, store), apply_store(e.right, store))
    if isinstance(e, Or):
        return Or(apply_store(e.left, store), apply_store(e.right, store))
    if isinstance(e, Implies):
        return Implies(apply_store(e.left, store), apply_store(e.right, store))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Folding, triviality, conjunction splitting
# ---------------------------------------------------------------------------


def _fold_literal_cmp(op: str, a: int, b: int) -> BExp | None:
    if a == b:
        return BoolLit(op in ("==", "<=", ">="))
    if 0 <= a < _FOLDABLE_LITERAL_BOUND and 0 <= b < _FOLDABLE_LITERAL_BOUND:
        result = {
            "==": a == b,
            "!=": a != b,
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
        }[op]
        return BoolLit(result)
    return None


def fold(e: Expr) -> Expr:
    """Bottom-up constant folding per the rules in the module docstring."""
    if isinstance(e, (IntLit, BoolLit, Var)):
        return e
    if isinstance(e, Neg):
        inner = fold(e.operand)
        if isinstance(inner, IntLit):
            return IntLit(-inner.value)
        return Neg(inner)
    if isinstance(e, BinOp):
        left, right = fold(e.left), fold(e.right)
        if isinstance(left, IntLit) and isinstance(right, IntLit):
            if e.op == "+":
                return IntLit(left.value + right.value)
            if e.op == "-":
                return IntLit(left.value - right.value)
            if e.op == "*":
                return IntLit(left.value * right.value)
            # Division is not folded: its value depends on signedness.
        return BinOp(e.op, left, right)
    if isinstance(e, Cmp):
        left, right = fold(e.left), fold(e.right)
        if isinstance(left, IntLit) and isinstance(right, IntLit):
            folded = _fold_literal_cmp(e.op, left.value, right.value)
            if folded is not None:
                return folded
        if left == right and not contains_division(left):
            return BoolLit(e.op in ("==", "<=", ">="))
        return Cmp(e.op, left, right)
    if isinstance(e, Not):
        inner = fold(e.operand)
        if isinstance(inner, BoolLit):
            return BoolLit(not inner.value)
        if isinstance(inner, Not):
            return inner.operand
        return Not(inner)
    if isinstance(e, And):
        left, right = fold(e.left), fold(e.right)
        if isinstance(left, BoolLit):
            return right if left.value else FALSE
        if isinstance(right, BoolLit):
            return left if right.value else FALSE
        return And(left, right)
    if isinstance(e, Or):
        left, right = fold(e.left), fold(e.right)
        if isinstance(left, BoolLit):
            return TRUE if left.value else right
        if isinstance(right, BoolLit):
            return TRUE if right.value else left
        return Or(left, right)
    if isinstance(e, Implies):
        left, right = fold(e.left), fold(e.right)
        if isinstance(left, BoolLit):
            return right if left.value else TRUE
        if isinstance(right, BoolLit) and right.value:
            return TRUE
        return Implies(left, right)
    raise TypeError(f"not an expression node: {e!r}")


def is_trivial(e: BExp) -> bool:
    """True iff the expression folds to the literal ``true`` or ``false``."""
    return isinstance(fold(e), BoolLit)


def negate(e: BExp) -> BExp:
    """Logical negation with double negations removed."""
    if isinstance(e, Not):
        return e.operand
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    return Not(e)


def split_conjunctions(e: BExp) -> list[BExp]:
    """Break an expression into top-level conjuncts.

    Negations are pushed inward one level (``!(a || b)`` contributes the
    conjuncts of ``!a`` and ``!b``); anything that is not a conjunction at the
    top level is returned whole, so conjoining the result is equivalent to
    the input.
    """
    if isinstance(e, And):
        return split_conjunctions(e.left) + split_conjunctions(e.right)
    if isinstance(e, Not):
        inner = e.operand
        if isinstance(inner, Or):
            return split_conjunctions(Not(inner.left)) + split_conjunctions(Not(inner.right))
        if isinstance(inner, Not):
            return split_conjunctions(inner.operand)
        if isinstance(inner, Implies):
            # !(a ==> b)  ==  a && !b
            return split_conjunctions(inner.left) + split_conjunctions(Not(inner.right))
    return [e]
