"""Bit-level encoding of fixed-width expressions into CNF.

Each program variable becomes ``width`` CNF variables (LSB first); arithmetic
is encoded with the usual ripple-carry/shift-add/restoring-division circuits
and Tseitin gates.  Division nodes additionally produce "divisor is nonzero"
side conditions so that a satisfying assignment never corresponds to a
faulting evaluation.
"""

from __future__ import annotations

from . import ast as A
from .machine import SymbolTable, expr_is_signed
from .sat import SatSolver


class CircuitBuilder:
    def __init__(self) -> None:
        self.solver = SatSolver()
        self.true_lit = self.solver.new_var()
        self.solver.add_clause([self.true_lit])
        self.false_lit = -self.true_lit
        self._gate_cache: dict[tuple, int] = {}

    # -- gates ---------------------------------------------------------------

    def lit_and(self, a: int, b: int) -> int:
        if a == self.false_lit or b == self.false_lit or a == -b:
            return self.false_lit
        if a == self.true_lit:
            return b
        if b == self.true_lit or a == b:
            return a
        key = ("and", min(a, b), max(a, b))
        cached = self._gate_cache.get(key)
        if cached is not None:
            return cached
        g = self.solver.new_var()
        self.solver.add_clause([-g, a])
        self.solver.add_clause([-g, b])
        self.solver.add_clause([g, -a, -b])
        self._gate_cache[key] = g
        return g

    def lit_or(self, a: int, b: int) -> int:
        return -self.lit_and(-a, -b)

    def lit_xor(self, a: int, b: int) -> int:
        if a == self.false_lit:
            return b
        if b == self.false_lit:
            return a
        if a == self.true_lit:
            return -b
        if b == self.true_lit:
            return -a
        if a == b:
            return self.false_lit
        if a == -b:
            return self.true_lit
        key = ("xor", min(abs(a), abs(b)), max(abs(a), abs(b)), (a > 0) == (b > 0))
        cached = self._gate_cache.get(key)
        if cached is not None:
            return cached
        g = self.solver.new_var()
        self.solver.add_clause([-g, a, b])
        self.solver.add_clause([-g, -a, -b])
        self.solver.add_clause([g, -a, b])
        self.solver.add_clause([g, a, -b])
        self._gate_cache[key] = g
        return g

    def lit_ite(self, sel: int, then_lit: int, else_lit: int) -> int:
        return self.lit_or(self.lit_and(sel, then_lit), self.lit_and(-sel, else_lit))

    # -- word-level circuits --------------------------------------------------

    def const_bits(self, value: int, width: int) -> list[int]:
        return [self.true_lit if (value >> i) & 1 else self.false_lit for i in range(width)]

    def add_bits(self, xs: list[int], ys: list[int], carry: int | None = None) -> list[int]:
        c = carry if carry is not None else self.false_lit
        out = []
        for x, y in zip(xs, ys):
            partial = self.lit_xor(x, y)
            out.append(self.lit_xor(partial, c))
            c = self.lit_or(self.lit_and(x, y), self.lit_and(partial, c))
        return out

    def sub_bits(self, xs: list[int], ys: list[int]) -> list[int]:
        return self.add_bits(xs, [-y for y in ys], self.true_lit)

    def neg_bits(self, xs: list[int]) -> list[int]:
        return self.add_bits([-x for x in xs], self.const_bits(0, len(xs)), self.true_lit)

    def mul_bits(self, xs: list[int], ys: list[int]) -> list[int]:
        width = len(xs)
        acc = self.const_bits(0, width)
        for i, y in enumerate(ys):
            partial = self.const_bits(0, width)
            for j in range(width - i):
                partial[i + j] = self.lit_and(y, xs[j])
            acc = self.add_bits(acc, partial)
        return acc

    def ult_bits(self, xs: list[int], ys: list[int]) -> int:
        lt = self.false_lit
        for x, y in zip(xs, ys):  # LSB first; the MSB decides last
            eq = -self.lit_xor(x, y)
            lt = self.lit_or(self.lit_and(-x, y), self.lit_and(eq, lt))
        return lt

    def slt_bits(self, xs: list[int], ys: list[int]) -> int:
        flipped_x = xs[:-1] + [-xs[-1]]
        flipped_y = ys[:-1] + [-ys[-1]]
        return self.ult_bits(flipped_x, flipped_y)

    def eq_bits(self, xs: list[int], ys: list[int]) -> int:
        out = self.true_lit
        for x, y in zip(xs, ys):
            out = self.lit_and(out, -self.lit_xor(x, y))
        return out

    def ite_bits(self, sel: int, xs: list[int], ys: list[int]) -> list[int]:
        return [self.lit_ite(sel, x, y) for x, y in zip(xs, ys)]

    def udivrem_bits(self, xs: list[int], ys: list[int]) -> tuple[list[int], list[int]]:
        """Restoring division; the value for a zero divisor is irrelevant
        because a nonzero side condition is asserted separately."""
        width = len(xs)
        ext = width + 1
        rem = self.const_bits(0, ext)
        ys_ext = ys + [self.false_lit]
        quot = [self.false_lit] * width
        for i in range(width - 1, -1, -1):
            rem = [xs[i]] + rem[:-1]
            geq = -self.ult_bits(rem, ys_ext)
            diff = self.sub_bits(rem, ys_ext)
            rem = self.ite_bits(geq, diff, rem)
            quot[i] = geq
        return quot, rem[:width]

    def abs_bits(self, xs: list[int]) -> list[int]:
        return self.ite_bits(xs[-1], self.neg_bits(xs), xs)


class Blaster:
    """Translates expressions into circuits over a shared builder."""

    def __init__(self, symtab: SymbolTable):
        self.symtab = symtab
        self.builder = CircuitBuilder()
        self.var_bits: dict[str, list[int]] = {}
        self.div_guards: list[int] = []
        self._arith_cache: dict[str, list[int]] = {}
        self._bool_cache: dict[str, int] = {}

    def bits_for(self, name: str) -> list[int]:
        if name not in self.var_bits:
            self.var_bits[name] = [self.builder.solver.new_var() for _ in range(self.symtab.width)]
        return self.var_bits[name]

    def arith(self, e: A.AExp) -> list[int]:
        key = A.to_source(e)
        cached = self._arith_cache.get(key)
        if cached is not None:
            return cached
        b = self.builder
        if isinstance(e, A.IntLit):
            result = b.const_bits(self.symtab.wrap(e.value), self.symtab.width)
        elif isinstance(e, A.Var):
            result = self.bits_for(e.name)
        elif isinstance(e, A.Neg):
            result = b.neg_bits(self.arith(e.operand))
        elif isinstance(e, A.BinOp):
            xs, ys = self.arith(e.left), self.arith(e.right)
            if e.op == "+":
                result = b.add_bits(xs, ys)
            elif e.op == "-":
                result = b.sub_bits(xs, ys)
            elif e.op == "*":
                result = b.mul_bits(xs, ys)
            elif e.op == "/":
                nonzero = self.builder.false_lit
                for y in ys:
                    nonzero = b.lit_or(nonzero, y)
                self.div_guards.append(nonzero)
                if expr_is_signed(e, self.symtab):
                    q, _ = b.udivrem_bits(b.abs_bits(xs), b.abs_bits(ys))
                    sign = b.lit_xor(xs[-1], ys[-1])
                    result = b.ite_bits(sign, b.neg_bits(q), q)
                else:
                    result, _ = b.udivrem_bits(xs, ys)
            else:
                raise ValueError(f"unknown operator {e.op!r}")
        else:
            raise TypeError(f"not arithmetic: {e!r}")
        self._arith_cache[key] = result
        return result

    def boolean(self, e: A.BExp) -> int:
        key = A.to_source(e)
        cached = self._bool_cache.get(key)
        if cached is not None:
            return cached
        b = self.builder
        if isinstance(e, A.BoolLit):
            result = b.true_lit if e.value else b.false_lit
        elif isinstance(e, A.Cmp):
            xs, ys = self.arith(e.left), self.arith(e.right)
            signed = expr_is_signed(e, self.symtab)
            less = b.slt_bits if signed else b.ult_bits
            if e.op == "==":
                result = b.eq_bits(xs, ys)
            elif e.op == "!=":
                result = -b.eq_bits(xs, ys)
            elif e.op == "<":
                result = less(xs, ys)
            elif e.op == ">":
                result = less(ys, xs)
            elif e.op == "<=":
                result = -less(ys, xs)
            else:
                result = -less(xs, ys)
        elif isinstance(e, A.Not):
            result = -self.boolean(e.operand)
        elif isinstance(e, A.And):
            result = b.lit_and(self.boolean(e.left), self.boolean(e.right))
        elif isinstance(e, A.Or):
            result = b.lit_or(self.boolean(e.left), self.boolean(e.right))
        elif isinstance(e, A.Implies):
            result = b.lit_or(-self.boolean(e.left), self.boolean(e.right))
        else:
            raise TypeError(f"not boolean: {e!r}")
        self._bool_cache[key] = result
        return result


def find_falsifying_model(
    expr: A.BExp, symtab: SymbolTable, conflict_budget: int = 200_000
) -> tuple[str, dict[str, int] | None]:
    """Search for a non-faulting assignment falsifying ``expr``.

    Returns ``("unsat", None)`` when no such assignment exists (the expression
    is valid), ``("sat", model)`` with canonical bit-pattern values, or
    ``("unknown", None)`` when the conflict budget runs out.
    """
    blaster = Blaster(symtab)
    root = blaster.boolean(expr)
    solver = blaster.builder.solver
    solver.add_clause([-root])
    for guard in blaster.div_guards:
        solver.add_clause([guard])
    outcome = solver.solve(conflict_budget)
    if outcome is None:
        return "unknown", None
    if outcome is False:
        return "unsat", None
    assignment = solver.model()
    model: dict[str, int] = {}
    for name, bits in blaster.var_bits.items():
        value = 0
        for i, lit in enumerate(bits):
            if assignment.get(abs(lit), False) == (lit > 0):
                value |= 1 << i
        model[name] = value
    return "sat", model
