"""Interval abstract interpretation with widening at loop heads.

Per location, every variable gets a bound pair in its own interpreted value
domain.  Interval arithmetic runs in unbounded integers; whenever a result
could leave the representable range of the enclosing expression's type the
result is widened to the full type range, which keeps the transfer sound
under wraparound.  After a configurable number of visits to a loop head,
growing bounds are widened to the type bounds (no narrowing pass).

The emitted loop-head invariants are conjunctions of bound constraints;
for unsigned variables the lower bound is always reported (so ``x >= 0``
appears even though it is vacuous for the type), bounds equal to the type
extremes are otherwise suppressed.
"""

from __future__ import annotations

import threading
import time

from ..lang.cfa import Assign, Assume, Call, Cfa, ErrorLabel, Havoc, ReturnOp
from ..logic import ast as A
from ..logic.machine import SymbolTable, expr_is_signed
from ..witness.matching import witness_from_invariants
from ..witness.model import LocatedInvariant
from .base import HelperResult, HelperStatus, stopped

PRODUCER = "coopcheck-interval"
WIDEN_AFTER = 3

Bounds = tuple[int, int]
Env = dict[str, Bounds]  # absent env (None) = unreachable


def _initial_env(symtab: SymbolTable) -> Env:
    return {name: (0, 0) for name in symtab.variables}


def _range_of(symtab: SymbolTable, signed: bool) -> Bounds:
    return symtab.bounds(signed)


def _clamp(symtab: SymbolTable, signed: bool, bounds: Bounds) -> Bounds:
    lo, hi = bounds
    type_lo, type_hi = _range_of(symtab, signed)
    if lo < type_lo or hi > type_hi:
        return (type_lo, type_hi)
    return bounds


def _expr_bounds(e: A.AExp, env: Env, symtab: SymbolTable, signed: bool) -> Bounds:
    """Interval of an expression, clamped to the type range on possible wrap."""
    if isinstance(e, A.IntLit):
        v = symtab.interp(symtab.wrap(e.value), signed)
        return (v, v)
    if isinstance(e, A.Var):
        if symtab.is_signed(e.name) != signed:
            # Mixed signedness: the pattern reinterpretation is not an
            # interval map, give up on precision.
            return _range_of(symtab, signed)
        return env[e.name]
    if isinstance(e, A.Neg):
        lo, hi = _expr_bounds(e.operand, env, symtab, signed)
        return _clamp(symtab, signed, (-hi, -lo))
    if isinstance(e, A.BinOp):
        a_lo, a_hi = _expr_bounds(e.left, env, symtab, signed)
        b_lo, b_hi = _expr_bounds(e.right, env, symtab, signed)
        if e.op == "+":
            return _clamp(symtab, signed, (a_lo + b_lo, a_hi + b_hi))
        if e.op == "-":
            return _clamp(symtab, signed, (a_lo - b_hi, a_hi - b_lo))
        if e.op == "*":
            corners = (a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi)
            return _clamp(symtab, signed, (min(corners), max(corners)))
        if e.op == "/":
            if b_lo <= 0 <= b_hi:
                return _range_of(symtab, signed)
            from ..logic.machine import trunc_div

            corners = (
                trunc_div(a_lo, b_lo),
                trunc_div(a_lo, b_hi),
                trunc_div(a_hi, b_lo),
                trunc_div(a_hi, b_hi),
            )
            return _clamp(symtab, signed, (min(corners), max(corners)))
    return _range_of(symtab, signed)


def _normalize_atom(e: A.BExp) -> A.BExp:
    """Push one negation into a comparison."""
    if isinstance(e, A.Not) and isinstance(e.operand, A.Cmp):
        flip = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
        inner = e.operand
        return A.Cmp(flip[inner.op], inner.left, inner.right)
    return e


def _refine(env: Env, cond: A.BExp, symtab: SymbolTable) -> Env | None:
    """Intersect the environment with an assumed condition (soundly partial:
    only single-variable comparisons in matching signedness refine)."""
    out = dict(env)
    for raw in A.split_conjunctions(cond):
        atom = _normalize_atom(raw)
        if not isinstance(atom, A.Cmp):
            continue
        for var_side, other, op in ((atom.left, atom.right, atom.op), (atom.right, atom.left, _mirror(atom.op))):
            if not isinstance(var_side, A.Var):
                continue
            name = var_side.name
            signed = expr_is_signed(atom, symtab)
            if symtab.is_signed(name) != signed:
                continue
            o_lo, o_hi = _expr_bounds(other, out, symtab, signed)
            lo, hi = out[name]
            if op == "==":
                lo, hi = max(lo, o_lo), min(hi, o_hi)
            elif op == "<":
                hi = min(hi, o_hi - 1)
            elif op == "<=":
                hi = min(hi, o_hi)
            elif op == ">":
                lo = max(lo, o_lo + 1)
            elif op == ">=":
                lo = max(lo, o_lo)
            else:
                continue
            if lo > hi:
                return None
            out[name] = (lo, hi)
    return out


def _mirror(op: str) -> str:
    return {"==": "==", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}[op]


def _join(a: Env | None, b: Env | None) -> Env | None:
    if a is None:
        return b
    if b is None:
        return a
    return {name: (min(a[name][0], b[name][0]), max(a[name][1], b[name][1])) for name in a}


def _widen(old: Env, new: Env, symtab: SymbolTable) -> Env:
    out = {}
    for name in old:
        (old_lo, old_hi), (new_lo, new_hi) = old[name], new[name]
        type_lo, type_hi = _range_of(symtab, symtab.is_signed(name))
        lo = new_lo if new_lo >= old_lo else type_lo
        hi = new_hi if new_hi <= old_hi else type_hi
        out[name] = (lo, hi)
    return out


def analyze_intervals(cfa: Cfa, stop_event: threading.Event | None = None) -> dict[int, Env | None]:
    """Interval fixpoint over all locations."""
    symtab = cfa.symtab
    envs: dict[int, Env | None] = {loc: None for loc in cfa.locations}
    envs[cfa.initial] = _initial_env(symtab)
    visits: dict[int, int] = {loc: 0 for loc in cfa.locations}
    worklist = [cfa.initial]
    while worklist:
        if stopped(stop_event):
            break
        loc = worklist.pop(0)
        env = envs[loc]
        if env is None:
            continue
        for edge in cfa.outgoing(loc):
            succ = _transfer(env, edge.op, symtab)
            if succ is None:
                continue
            joined = _join(envs[edge.target], succ)
            if edge.target in cfa.loop_heads and envs[edge.target] is not None:
                visits[edge.target] += 1
                if visits[edge.target] >= WIDEN_AFTER and joined != envs[edge.target]:
                    joined = _widen(envs[edge.target], joined, symtab)
            if joined != envs[edge.target]:
                envs[edge.target] = joined
                if edge.target not in worklist:
                    worklist.append(edge.target)
    return envs


def _transfer(env: Env, op, symtab: SymbolTable) -> Env | None:
    if isinstance(op, Assume):
        return _refine(env, op.effective, symtab)
    if isinstance(op, Assign):
        # The stored pattern is read back in the target's interpretation, so
        # the right-hand side is evaluated there; mismatched variables widen.
        signed = symtab.is_signed(op.target)
        out = dict(env)
        out[op.target] = _expr_bounds(op.expr, env, symtab, signed)
        return out
    if isinstance(op, Havoc):
        out = dict(env)
        out[op.target] = _range_of(symtab, symtab.is_signed(op.target))
        return out
    if isinstance(op, (Call, ReturnOp, ErrorLabel)):
        return env
    raise TypeError(f"unknown operation {op!r}")


def bounds_invariant(env: Env, symtab: SymbolTable) -> A.BExp | None:
    """Render an environment as a conjunction of bound constraints."""
    parts: list[A.BExp] = []
    for name in sorted(env):
        lo, hi = env[name]
        signed = symtab.is_signed(name)
        type_lo, type_hi = _range_of(symtab, signed)
        if not signed or lo > type_lo:
            parts.append(A.Cmp(">=", A.Var(name), _lit(lo)))
        if hi < type_hi:
            parts.append(A.Cmp("<=", A.Var(name), _lit(hi)))
    if not parts:
        return None
    return A.conjoin(parts)


def _lit(value: int) -> A.AExp:
    return A.Neg(A.IntLit(-value)) if value < 0 else A.IntLit(value)


def interval_analysis(cfa: Cfa, stop_event: threading.Event | None = None) -> HelperResult:
    """Helper entry point: interval invariants at every loop head."""
    started = time.monotonic()
    envs = analyze_intervals(cfa, stop_event)
    if stopped(stop_event):
        return HelperResult(HelperStatus.STOPPED, elapsed=time.monotonic() - started)
    invariants: list[LocatedInvariant] = []
    for head in sorted(cfa.loop_heads):
        env = envs[head]
        if env is None:
            continue
        expr = bounds_invariant(env, cfa.symtab)
        if expr is not None:
            invariants.append(LocatedInvariant(head, expr, PRODUCER))
    witness = witness_from_invariants(cfa, invariants, PRODUCER)
    return HelperResult(
        HelperStatus.COMPLETED,
        invariants=invariants,
        witness=witness,
        elapsed=time.monotonic() - started,
    )
