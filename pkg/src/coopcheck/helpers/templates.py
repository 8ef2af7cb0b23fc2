"""Template-based candidate invariants, screened by sampled executions.

Enumerates linear candidate shapes ``a*v1 + b*v2 + c*v3 (op) d`` with small
coefficients over up to three variables, plus atoms harvested from the
property and branch guards.  Candidates are screened against loop-head
states collected from randomly sampled concrete executions and emitted
WITHOUT proof: survivors may still be wrong (zero samples keep every
syntactic candidate), which deliberately exercises the masters' validation
path.
"""

from __future__ import annotations

import itertools
import random
import threading
import time
from math import gcd

from ..lang.cfa import Assume, Cfa, Havoc, SafetyProperty
from ..logic import ast as A
from ..logic.evaluate import eval_expr
from ..logic.machine import EvalFault
from ..semantics import initial_state, step
from ..witness.matching import witness_from_invariants
from ..witness.model import LocatedInvariant
from .base import HelperResult, HelperStatus, stopped

PRODUCER = "coopcheck-template"

COEFF_RANGE = (-2, -1, 1, 2)
CONST_RANGE = (-2, -1, 0, 1, 2)
MAX_TEMPLATE_VARS = 3
DEFAULT_SAMPLES = 40
_SAMPLE_STEP_LIMIT = 400


def _canonical(coeffs: tuple[int, ...]) -> bool:
    nonzero = [c for c in coeffs if c != 0]
    if not nonzero or nonzero[0] < 0:
        return False
    common = 0
    for c in nonzero:
        common = gcd(common, abs(c))
    return common == 1


def _linear_expr(pairs: list[tuple[int, str]]) -> A.AExp:
    expr: A.AExp | None = None
    for coeff, name in pairs:
        mag = abs(coeff)
        term: A.AExp = A.Var(name) if mag == 1 else A.BinOp("*", A.IntLit(mag), A.Var(name))
        if expr is None:
            expr = A.Neg(term) if coeff < 0 else term
        else:
            expr = A.BinOp("-" if coeff < 0 else "+", expr, term)
    assert expr is not None
    return expr


def generate_candidates(cfa: Cfa, prop: SafetyProperty) -> list[A.BExp]:
    """The raw candidate pool before any screening."""
    names = cfa.symtab.variables
    candidates: list[A.BExp] = []
    seen: set[str] = set()

    def push(expr: A.BExp) -> None:
        if A.is_trivial(expr):
            return
        text = A.to_source(expr)
        if text not in seen:
            seen.add(text)
            candidates.append(expr)

    for atom in A.atoms(prop.condition):
        push(atom)
        if isinstance(atom, A.Cmp) and atom.op == "==":
            push(A.Cmp(">=", atom.left, atom.right))
            push(A.Cmp("<=", atom.left, atom.right))
    for edge in cfa.edges:
        if isinstance(edge.op, Assume):
            for atom in A.atoms(edge.op.condition):
                push(atom)

    # equalities first so relational candidates survive truncation by callers
    for op in ("==", ">=", "<="):
        for size in range(1, min(MAX_TEMPLATE_VARS, len(names)) + 1):
            for subset in itertools.combinations(names, size):
                for coeffs in itertools.product(COEFF_RANGE, repeat=size):
                    if not _canonical(coeffs):
                        continue
                    lhs = _linear_expr(list(zip(coeffs, subset)))
                    for d in CONST_RANGE:
                        rhs: A.AExp = A.Neg(A.IntLit(-d)) if d < 0 else A.IntLit(d)
                        push(A.Cmp(op, lhs, rhs))
    return candidates


def sample_loop_head_states(
    cfa: Cfa, samples: int, seed: int, stop_event: threading.Event | None = None
) -> dict[int, list[dict[str, int]]]:
    """States observed at each loop head over randomly driven executions."""
    rng = random.Random(seed)
    symtab = cfa.symtab
    observed: dict[int, list[dict[str, int]]] = {head: [] for head in cfa.loop_heads}
    for _ in range(samples):
        if stopped(stop_event):
            break
        state = initial_state(symtab)
        loc = cfa.initial
        for _ in range(_SAMPLE_STEP_LIMIT):
            if loc in observed:
                observed[loc].append(dict(state))
            edges = cfa.outgoing(loc)
            if not edges:
                break
            # nondeterministic branch choice mirrors input nondeterminism
            candidates = []
            for edge in edges:
                value = rng.randrange(0, symtab.mask + 1) if isinstance(edge.op, Havoc) else None
                succ = step(state, edge.op, symtab, havoc_value=value)
                if succ is not None:
                    candidates.append((edge, succ))
            if not candidates:
                break
            edge, state = candidates[rng.randrange(len(candidates))] if len(candidates) > 1 else candidates[0]
            loc = edge.target
    return observed


def template_guess_check(
    cfa: Cfa,
    prop: SafetyProperty,
    samples: int = DEFAULT_SAMPLES,
    max_candidates: int | None = None,
    seed: int | None = None,
    stop_event: threading.Event | None = None,
) -> HelperResult:
    """Helper entry point: unproven candidate invariants per loop head.

    With ``samples=0`` the screening is vacuous and every syntactic candidate
    survives; ``max_candidates`` optionally truncates the per-head output.
    """
    started = time.monotonic()
    if seed is None:
        seed = sum(cfa.source_hash.encode())  # deterministic per program
    pool = generate_candidates(cfa, prop)
    observed = sample_loop_head_states(cfa, samples, seed, stop_event)
    if stopped(stop_event):
        return HelperResult(HelperStatus.STOPPED, elapsed=time.monotonic() - started)
    invariants: list[LocatedInvariant] = []
    for head in sorted(cfa.loop_heads):
        states = observed.get(head, [])
        survivors: list[A.BExp] = []
        for candidate in pool:
            ok = True
            for state in states:
                try:
                    if eval_expr(candidate, state, cfa.symtab) is False:
                        ok = False
                        break
                except EvalFault:
                    continue
            if ok:
                survivors.append(candidate)
            if max_candidates is not None and len(survivors) >= max_candidates:
                break
        for expr in survivors:
            invariants.append(LocatedInvariant(head, expr, PRODUCER))
    witness = witness_from_invariants(cfa, invariants, PRODUCER)
    return HelperResult(
        HelperStatus.COMPLETED,
        invariants=invariants,
        witness=witness,
        elapsed=time.monotonic() - started,
    )
