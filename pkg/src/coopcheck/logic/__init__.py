"""Expression ASTs, machine-integer semantics and the validity checker."""

from .ast import (
    AExp,
    And,
    BExp,
    BinOp,
    BoolLit,
    Cmp,
    Expr,
    FALSE,
    Implies,
    IntLit,
    Neg,
    Not,
    Or,
    TRUE,
    Var,
    apply_store,
    atoms,
    conjoin,
    disjoin,
    fold,
    free_vars,
    is_trivial,
    negate,
    split_conjunctions,
    substitute,
    to_source,
)
from .machine import DEFAULT_WIDTH, EvalFault, SymbolTable, expr_is_signed
from .parser import ExprSyntaxError, parse_arith, parse_expression
from .evaluate import eval_expr
from .validity import (
    Answer,
    DEFAULT_ENUM_BUDGET,
    ValidityChecker,
    ValidityResult,
    equivalent,
    valid,
)

__all__ = [
    "AExp",
    "And",
    "Answer",
    "BExp",
    "BinOp",
    "BoolLit",
    "Cmp",
    "DEFAULT_ENUM_BUDGET",
    "DEFAULT_WIDTH",
    "EvalFault",
    "Expr",
    "ExprSyntaxError",
    "FALSE",
    "Implies",
    "IntLit",
    "Neg",
    "Not",
    "Or",
    "SymbolTable",
    "TRUE",
    "ValidityChecker",
    "ValidityResult",
    "Var",
    "apply_store",
    "atoms",
    "conjoin",
    "disjoin",
    "equivalent",
    "eval_expr",
    "expr_is_signed",
    "fold",
    "free_vars",
    "is_trivial",
    "negate",
    "parse_arith",
    "parse_expression",
    "split_conjunctions",
    "substitute",
    "to_source",
    "valid",
]
