"""Affine-equality invariant generation (Karr-style analysis).

Tracks, per location, the affine hull of the reachable variable valuations
as a point plus a direction basis over the rationals.  Linear assignments
map the space, nondeterministic input and nonlinear assignments add a free
direction for the target, joins take affine hulls, and assumed linear
equalities intersect with their hyperplane.  Increasing chains are bounded
by the dimension, so the fixpoint needs no widening.

The analysis runs over unbounded integers; because program arithmetic wraps,
each resulting equation is screened against the concretely reachable
loop-head states (explicit enumeration up to a budget) before it is
emitted.  Equations that survive screening hold under machine semantics on
the explored fragment; masters validate them again regardless.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from ..lang.cfa import Assign, Assume, Call, Cfa, ErrorLabel, Havoc, ReturnOp
from ..logic import ast as A
from ..witness.matching import witness_from_invariants
from ..witness.model import LocatedInvariant
from .base import HelperResult, HelperStatus, stopped

PRODUCER = "coopcheck-affine"
DEFAULT_SCREEN_BUDGET = 120_000

Vector = tuple[Fraction, ...]


def _linear_coeffs(e: A.AExp, names: tuple[str, ...]) -> tuple[Fraction, dict[str, Fraction]] | None:
    """Decompose into constant + coefficient map; None when nonlinear."""
    if isinstance(e, A.IntLit):
        return Fraction(e.value), {}
    if isinstance(e, A.Var):
        return Fraction(0), {e.name: Fraction(1)}
    if isinstance(e, A.Neg):
        inner = _linear_coeffs(e.operand, names)
        if inner is None:
            return None
        c, m = inner
        return -c, {k: -v for k, v in m.items()}
    if isinstance(e, A.BinOp):
        left = _linear_coeffs(e.left, names)
        right = _linear_coeffs(e.right, names)
        if left is None or right is None:
            return None
        (cl, ml), (cr, mr) = left, right
        if e.op == "+":
            return cl + cr, _add_maps(ml, mr, 1)
        if e.op == "-":
            return cl - cr, _add_maps(ml, mr, -1)
        if e.op == "*":
            if not ml:
                return cl * cr, {k: cl * v for k, v in mr.items()}
            if not mr:
                return cl * cr, {k: cr * v for k, v in ml.items()}
            return None
        return None  # division is nonlinear here
    return None


def _add_maps(a: dict[str, Fraction], b: dict[str, Fraction], sign: int) -> dict[str, Fraction]:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) + sign * v
    return {k: v for k, v in out.items() if v != 0}


def _reduce(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """Row-reduce to a canonical basis (reduced row echelon, no zero rows)."""
    matrix = [row[:] for row in rows]
    pivots = []
    r = 0
    cols = len(matrix[0]) if matrix else 0
    for c in range(cols):
        pivot = next((i for i in range(r, len(matrix)) if matrix[i][c] != 0), None)
        if pivot is None:
            continue
        matrix[r], matrix[pivot] = matrix[pivot], matrix[r]
        factor = matrix[r][c]
        matrix[r] = [v / factor for v in matrix[r]]
        for i in range(len(matrix)):
            if i != r and matrix[i][c] != 0:
                f = matrix[i][c]
                matrix[i] = [v - f * w for v, w in zip(matrix[i], matrix[r])]
        pivots.append(c)
        r += 1
        if r == len(matrix):
            break
    return [row for row in matrix[:r] if any(v != 0 for v in row)]


@dataclass(frozen=True)
class AffineSpace:
    """Affine subspace: {point + span(directions)}; canonical directions."""

    point: Vector
    directions: tuple[Vector, ...]

    @classmethod
    def of_point(cls, point: Vector) -> "AffineSpace":
        return cls(point, ())

    def contains_direction(self, vec: Vector) -> bool:
        rows = [list(d) for d in self.directions] + [list(vec)]
        return len(_reduce(rows)) == len(self.directions)

    def join(self, other: "AffineSpace") -> "AffineSpace":
        diff = tuple(b - a for a, b in zip(self.point, other.point))
        rows = [list(d) for d in self.directions + other.directions] + [list(diff)]
        return AffineSpace(self.point, tuple(tuple(r) for r in _reduce(rows)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffineSpace):
            return NotImplemented
        if self.directions != other.directions:
            return False
        diff = tuple(b - a for a, b in zip(self.point, other.point))
        if all(v == 0 for v in diff):
            return True
        return self.contains_direction(diff)

    def __hash__(self) -> int:  # pragma: no cover - not used as dict key
        return hash(self.directions)


def _assign_map(space: AffineSpace, index: int, const: Fraction, coeffs: dict[str, Fraction], names: tuple[str, ...]) -> AffineSpace:
    def map_point(p: Vector) -> Vector:
        value = const + sum(coeffs.get(n, Fraction(0)) * p[i] for i, n in enumerate(names))
        return tuple(value if i == index else v for i, v in enumerate(p))

    def map_dir(d: Vector) -> Vector:
        value = sum(coeffs.get(n, Fraction(0)) * d[i] for i, n in enumerate(names))
        return tuple(value if i == index else v for i, v in enumerate(d))

    dirs = _reduce([list(map_dir(d)) for d in space.directions])
    return AffineSpace(map_point(space.point), tuple(tuple(r) for r in dirs))


def _havoc(space: AffineSpace, index: int) -> AffineSpace:
    unit = tuple(Fraction(1 if i == index else 0) for i in range(len(space.point)))
    rows = [list(d) for d in space.directions] + [list(unit)]
    return AffineSpace(space.point, tuple(tuple(r) for r in _reduce(rows)))


def _intersect_hyperplane(
    space: AffineSpace, coeffs: Vector, rhs: Fraction
) -> AffineSpace | None:
    """Intersect with {x : coeffs . x = rhs}; None means empty."""
    dot_p = sum(c * p for c, p in zip(coeffs, space.point))
    dot_dirs = [sum(c * d for c, d in zip(coeffs, direction)) for direction in space.directions]
    pivot = next((i for i, v in enumerate(dot_dirs) if v != 0), None)
    if pivot is None:
        return space if dot_p == rhs else None
    pivot_dir = space.directions[pivot]
    scale = (rhs - dot_p) / dot_dirs[pivot]
    new_point = tuple(p + scale * d for p, d in zip(space.point, pivot_dir))
    new_dirs = []
    for i, direction in enumerate(space.directions):
        if i == pivot:
            continue
        f = dot_dirs[i] / dot_dirs[pivot]
        new_dirs.append([d - f * pd for d, pd in zip(direction, pivot_dir)])
    return AffineSpace(new_point, tuple(tuple(r) for r in _reduce(new_dirs)))


def _normalize_eq_atom(e: A.BExp) -> A.Cmp | None:
    if isinstance(e, A.Not) and isinstance(e.operand, A.Cmp) and e.operand.op == "!=":
        return A.Cmp("==", e.operand.left, e.operand.right)
    if isinstance(e, A.Cmp) and e.op == "==":
        return e
    return None


def _transfer(space: AffineSpace, op, names: tuple[str, ...]) -> AffineSpace | None:
    if isinstance(op, Assign):
        index = names.index(op.target)
        lin = _linear_coeffs(op.expr, names)
        if lin is None:
            return _havoc(space, index)
        const, coeffs = lin
        return _assign_map(space, index, const, coeffs, names)
    if isinstance(op, Havoc):
        return _havoc(space, names.index(op.target))
    if isinstance(op, Assume):
        current = space
        for raw in A.split_conjunctions(op.effective):
            atom = _normalize_eq_atom(raw)
            if atom is None:
                continue
            left = _linear_coeffs(atom.left, names)
            right = _linear_coeffs(atom.right, names)
            if left is None or right is None:
                continue
            (cl, ml), (cr, mr) = left, right
            diff = _add_maps(ml, mr, -1)
            coeffs = tuple(diff.get(n, Fraction(0)) for n in names)
            result = _intersect_hyperplane(current, coeffs, cr - cl)
            if result is None:
                return None
            current = result
        return current
    if isinstance(op, (Call, ReturnOp, ErrorLabel)):
        return space
    raise TypeError(f"unknown operation {op!r}")


def analyze_affine(cfa: Cfa, stop_event: threading.Event | None = None) -> dict[int, AffineSpace | None]:
    names = cfa.symtab.variables
    spaces: dict[int, AffineSpace | None] = {loc: None for loc in cfa.locations}
    spaces[cfa.initial] = AffineSpace.of_point(tuple(Fraction(0) for _ in names))
    worklist = [cfa.initial]
    while worklist:
        if stopped(stop_event):
            break
        loc = worklist.pop(0)
        space = spaces[loc]
        if space is None:
            continue
        for edge in cfa.outgoing(loc):
            succ = _transfer(space, edge.op, names)
            if succ is None:
                continue
            existing = spaces[edge.target]
            joined = succ if existing is None else existing.join(succ)
            if existing is None or joined != existing:
                spaces[edge.target] = joined
                if edge.target not in worklist:
                    worklist.append(edge.target)
    return spaces


def equations_of(space: AffineSpace, names: tuple[str, ...]) -> list[tuple[dict[str, int], int]]:
    """Integer equations ``sum(coeff*var) == rhs`` cutting out the space.

    Derived from the orthogonal complement of the direction span; the first
    nonzero coefficient is positive and coefficients share no common factor.
    """
    n = len(names)
    rows = [list(d) for d in space.directions]
    basis = _reduce(rows) if rows else []
    pivots = []
    for row in basis:
        pivots.append(next(i for i, v in enumerate(row) if v != 0))
    free = [i for i in range(n) if i not in pivots]
    # Each free axis yields one equation: x_free determined by pivot axes.
    equations: list[tuple[dict[str, int], int]] = []
    # Solve: the complement row space of `basis` (vectors c with c . d = 0).
    for axis in free:
        coeffs = [Fraction(0)] * n
        coeffs[axis] = Fraction(1)
        for row, pivot in zip(basis, pivots):
            coeffs[pivot] = -row[axis] / row[pivot] if row[pivot] != 0 else Fraction(0)
        # c . d = 0 holds for every basis direction by construction
        rhs = sum(c * p for c, p in zip(coeffs, space.point))
        denominator = 1
        for value in coeffs + [rhs]:
            denominator = denominator * value.denominator // gcd(denominator, value.denominator)
        ints = [int(value * denominator) for value in coeffs]
        rhs_int = int(rhs * denominator)
        common = 0
        for value in ints + [rhs_int]:
            common = gcd(common, abs(value))
        if common > 1:
            ints = [v // common for v in ints]
            rhs_int //= common
        first = next((v for v in ints if v != 0), 1)
        if first < 0:
            ints = [-v for v in ints]
            rhs_int = -rhs_int
        equations.append(({name: c for name, c in zip(names, ints) if c != 0}, rhs_int))
    return equations


def equation_to_expr(coeffs: dict[str, int], rhs: int, names: tuple[str, ...]) -> A.BExp:
    """Render ``sum(coeff*var) == rhs`` as an expression like ``n-x-y == 0``."""
    terms = [(name, coeffs[name]) for name in names if name in coeffs]
    expr: A.AExp | None = None
    for name, coeff in terms:
        mag = abs(coeff)
        term: A.AExp = A.Var(name) if mag == 1 else A.BinOp("*", A.IntLit(mag), A.Var(name))
        if expr is None:
            expr = A.Neg(term) if coeff < 0 else term
        else:
            expr = A.BinOp("-" if coeff < 0 else "+", expr, term)
    if expr is None:
        expr = A.IntLit(0)
    rhs_expr: A.AExp = A.Neg(A.IntLit(-rhs)) if rhs < 0 else A.IntLit(rhs)
    return A.Cmp("==", expr, rhs_expr)


def affine_equality_analysis(
    cfa: Cfa,
    stop_event: threading.Event | None = None,
    screen_budget: int = DEFAULT_SCREEN_BUDGET,
) -> HelperResult:
    """Helper entry point: affine equations at every loop head."""
    started = time.monotonic()
    names = cfa.symtab.variables
    spaces = analyze_affine(cfa, stop_event)
    if stopped(stop_event):
        return HelperResult(HelperStatus.STOPPED, elapsed=time.monotonic() - started)
    diagnostics: list[str] = []
    invariants: list[LocatedInvariant] = []
    screen_cache: dict[int, list | None] = {}
    for head in sorted(cfa.loop_heads):
        space = spaces[head]
        if space is None:
            continue
        exprs = [equation_to_expr(coeffs, rhs, names) for coeffs, rhs in equations_of(space, names)]
        kept = _screen(cfa, head, exprs, screen_budget, screen_cache, diagnostics)
        if kept:
            invariants.append(LocatedInvariant(head, A.conjoin(kept) if len(kept) > 1 else kept[0], PRODUCER))
    witness = witness_from_invariants(cfa, invariants, PRODUCER)
    return HelperResult(
        HelperStatus.COMPLETED,
        invariants=invariants,
        witness=witness,
        elapsed=time.monotonic() - started,
        diagnostics=diagnostics,
    )


def _screen(cfa, head, exprs, budget, cache, diagnostics) -> list[A.BExp]:
    """Drop equations falsified by some concretely reachable loop-head state
    (wraparound can break the rational-hull argument)."""
    if not exprs or budget <= 0:
        return exprs
    from ..semantics import reachable_states_at
    from ..logic.evaluate import eval_expr
    from ..logic.machine import EvalFault

    if head not in cache:
        cache[head] = reachable_states_at(cfa, head, budget)
    states = cache[head]
    if states is None:
        diagnostics.append(f"screening budget exceeded at loop head {head}; equations unscreened")
        return exprs
    kept = []
    for expr in exprs:
        ok = True
        for state in states:
            try:
                if eval_expr(expr, state, cfa.symtab) is False:
                    ok = False
                    break
            except EvalFault:
                continue
        if ok:
            kept.append(expr)
        else:
            diagnostics.append(f"dropped wrapped-around equation {A.to_source(expr)} at loop head {head}")
    return kept
