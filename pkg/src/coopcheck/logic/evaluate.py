"""Concrete evaluation of expressions under fixed-width machine semantics.

Two evaluators share the same semantics: a scalar one used by the concrete
interpreter, and a vectorized numpy one used by the validity checker to sweep
whole assignment grids at once.  Division by zero raises
:class:`~coopcheck.logic.machine.EvalFault` in the scalar evaluator and is
reported through a fault mask in the vectorized one.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from . import ast as A
from .machine import EvalFault, SymbolTable, expr_is_signed, trunc_div


def eval_expr(e: A.Expr, env: Mapping[str, int], symtab: SymbolTable):
    """Evaluate to a canonical bit pattern (AExp) or a bool (BExp)."""
    if isinstance(e, A.IntLit):
        return symtab.wrap(e.value)
    if isinstance(e, A.BoolLit):
        return e.value
    if isinstance(e, A.Var):
        try:
            return env[e.name]
        except KeyError:
            raise KeyError(f"variable {e.name!r} not in state") from None
    if isinstance(e, A.Neg):
        return symtab.wrap(-eval_expr(e.operand, env, symtab))
    if isinstance(e, A.BinOp):
        left = eval_expr(e.left, env, symtab)
        right = eval_expr(e.right, env, symtab)
        if e.op == "+":
            return symtab.wrap(left + right)
        if e.op == "-":
            return symtab.wrap(left - right)
        if e.op == "*":
            return symtab.wrap(left * right)
        if e.op == "/":
            if right == 0:
                raise EvalFault("division by zero")
            signed = expr_is_signed(e, symtab)
            a = symtab.interp(left, signed)
            b = symtab.interp(right, signed)
            return symtab.wrap(trunc_div(a, b))
        raise ValueError(f"unknown operator {e.op!r}")
    if isinstance(e, A.Cmp):
        signed = expr_is_signed(e, symtab)
        a = symtab.interp(eval_expr(e.left, env, symtab), signed)
        b = symtab.interp(eval_expr(e.right, env, symtab), signed)
        return {
            "==": a == b,
            "!=": a != b,
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
        }[e.op]
    if isinstance(e, A.Not):
        return not eval_expr(e.operand, env, symtab)
    if isinstance(e, A.And):
        # Strict evaluation: both sides are evaluated so that faults are
        # never masked by short-circuiting.
        left = eval_expr(e.left, env, symtab)
        right = eval_expr(e.right, env, symtab)
        return left and right
    if isinstance(e, A.Or):
        left = eval_expr(e.left, env, symtab)
        right = eval_expr(e.right, env, symtab)
        return left or right
    if isinstance(e, A.Implies):
        left = eval_expr(e.left, env, symtab)
        right = eval_expr(e.right, env, symtab)
        return (not left) or right
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Vectorized evaluation
# ---------------------------------------------------------------------------


class _GridEval:
    """Evaluates an expression over numpy arrays of canonical bit patterns.

    Arithmetic is carried out in uint64 and masked after every operation;
    results are exact for widths up to 32 (products fit in 64 bits).
    """

    def __init__(self, symtab: SymbolTable, env: Mapping[str, np.ndarray]):
        self.symtab = symtab
        self.env = env
        self.fault: np.ndarray | None = None  # true where evaluation faulted
        self.mask = np.uint64(symtab.mask)

    def _signed_view(self, pattern: np.ndarray) -> np.ndarray:
        half = np.uint64(1 << (self.symtab.width - 1))
        out = pattern.astype(np.int64)
        out[pattern >= half] -= np.int64(1 << self.symtab.width)
        return out

    def _interp(self, pattern: np.ndarray, signed: bool) -> np.ndarray:
        return self._signed_view(pattern) if signed else pattern.astype(np.int64)

    def _add_fault(self, where: np.ndarray) -> None:
        self.fault = where.copy() if self.fault is None else (self.fault | where)

    def arith(self, e: A.AExp) -> np.ndarray:
        if isinstance(e, A.IntLit):
            return np.uint64(self.symtab.wrap(e.value))
        if isinstance(e, A.Var):
            return self.env[e.name]
        if isinstance(e, A.Neg):
            return (np.uint64(0) - self.arith(e.operand)) & self.mask
        if isinstance(e, A.BinOp):
            left = self.arith(e.left)
            right = self.arith(e.right)
            if e.op == "+":
                return (left + right) & self.mask
            if e.op == "-":
                return (left - right) & self.mask
            if e.op == "*":
                return (left * right) & self.mask
            if e.op == "/":
                right_b = np.broadcast_to(np.asarray(right), np.broadcast_shapes(np.shape(left), np.shape(right)))
                zero = right_b == 0
                self._add_fault(zero)
                signed = expr_is_signed(e, self.symtab)
                a = self._interp(np.broadcast_to(np.asarray(left), right_b.shape), signed)
                b = np.where(zero, np.int64(1), self._interp(right_b, signed))
                q = np.abs(a) // np.abs(b)
                q = np.where((a < 0) != (b < 0), -q, q)
                return q.astype(np.uint64) & self.mask
            raise ValueError(f"unknown operator {e.op!r}")
        raise TypeError(f"not arithmetic: {e!r}")

    def boolean(self, e: A.BExp) -> np.ndarray:
        if isinstance(e, A.BoolLit):
            return np.bool_(e.value)
        if isinstance(e, A.Cmp):
            signed = expr_is_signed(e, self.symtab)
            a = self._interp(np.asarray(self.arith(e.left)), signed)
            b = self._interp(np.asarray(self.arith(e.right)), signed)
            return {
                "==": lambda: a == b,
                "!=": lambda: a != b,
                "<": lambda: a < b,
                "<=": lambda: a <= b,
                ">": lambda: a > b,
                ">=": lambda: a >= b,
            }[e.op]()
        if isinstance(e, A.Not):
            return ~np.asarray(self.boolean(e.operand))
        if isinstance(e, A.And):
            return np.asarray(self.boolean(e.left)) & np.asarray(self.boolean(e.right))
        if isinstance(e, A.Or):
            return np.asarray(self.boolean(e.left)) | np.asarray(self.boolean(e.right))
        if isinstance(e, A.Implies):
            return ~np.asarray(self.boolean(e.left)) | np.asarray(self.boolean(e.right))
        raise TypeError(f"not boolean: {e!r}")


def eval_bexp_grid(
    e: A.BExp, env: Mapping[str, np.ndarray], symtab: SymbolTable
) -> tuple[np.ndarray, np.ndarray | None]:
    """Evaluate a boolean expression over arrays.

    Returns ``(values, fault_mask)``; the fault mask is None when no division
    can fault, and marks assignments whose evaluation divides by zero (their
    ``values`` entries are meaningless).
    """
    ev = _GridEval(symtab, env)
    values = np.asarray(ev.boolean(e))
    return values, ev.fault
