"""Symbolic execution over CFA paths for the master analyses.

Stores map variables to expressions over the initial variables plus fresh
symbols introduced by nondeterministic input; path conditions accumulate
assumed guards.  During segment walks, loop heads other than the one under
analysis are crossed via loop summaries: everything the loop modifies is
replaced by fresh symbols and the head's accepted invariants are assumed,
after which all outgoing edges are explored.  Each summarized head is
expanded at most once per path; the summary state covers every later
arrival, so pruning repeats loses no behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..lang.cfa import Assign, Assume, Call, Cfa, Edge, ErrorLabel, Havoc, ReturnOp, SafetyProperty
from ..logic import ast as A
from ..logic.machine import SymbolTable

AuxInvariants = dict[int, list[A.BExp]]  # loop head -> accepted invariants


class PathBudgetExceeded(Exception):
    """A symbolic walk grew past its path budget."""


class FreshVars:
    """Fresh symbolic variables, typed like the variable they replace."""

    def __init__(self, symtab: SymbolTable):
        self.base = symtab
        self.registry: dict[str, bool] = {}
        self._counter = 0

    def make(self, like: str) -> str:
        self._counter += 1
        name = f"{like}%{self._counter}"
        self.registry[name] = self.base.is_signed(like)
        return name

    def extended_symtab(self) -> SymbolTable:
        return self.base.extended(self.registry)


@dataclass(frozen=True)
class SymState:
    store: dict[str, A.AExp]
    constraints: tuple[A.BExp, ...] = ()
    # havoc resolutions in traversal order: (index into trace, fresh name)
    havocs: tuple[tuple[int, str], ...] = ()
    trace: tuple[Edge, ...] = ()
    summarized: frozenset[int] = frozenset()

    def condition(self) -> A.BExp:
        return A.conjoin(list(self.constraints))


def identity_store(symtab: SymbolTable) -> dict[str, A.AExp]:
    return {name: A.Var(name) for name in symtab.variables}


def zero_store(symtab: SymbolTable) -> dict[str, A.AExp]:
    return {name: A.IntLit(0) for name in symtab.variables}


def assume_into(state: SymState, cond: A.BExp) -> SymState | None:
    """Conjoin an already-store-applied condition; None when it folds false."""
    folded = A.fold(cond)
    if isinstance(folded, A.BoolLit):
        return state if folded.value else None
    return replace(state, constraints=state.constraints + (folded,))


def apply_edge(state: SymState, edge: Edge, fresh: FreshVars) -> SymState | None:
    """Execute one edge symbolically; None when the path dies syntactically."""
    op = edge.op
    traced = replace(state, trace=state.trace + (edge,))
    if isinstance(op, Assume):
        return assume_into(traced, A.apply_store(op.effective, state.store))
    if isinstance(op, Assign):
        store = dict(state.store)
        store[op.target] = A.apply_store(op.expr, state.store)
        return replace(traced, store=store)
    if isinstance(op, Havoc):
        name = fresh.make(op.target)
        store = dict(state.store)
        store[op.target] = A.Var(name)
        return replace(traced, store=store, havocs=state.havocs + ((len(state.trace), name),))
    if isinstance(op, (Call, ReturnOp, ErrorLabel)):
        return traced
    raise TypeError(f"unknown operation {op!r}")


def summarize_head(
    state: SymState, head: int, cfa: Cfa, fresh: FreshVars, aux: AuxInvariants
) -> SymState | None:
    """Weaken the state to "after arbitrarily many iterations" of ``head``:
    havoc everything the loop modifies, assume the head's accepted
    invariants.  Covers the arrival state itself (zero further iterations)."""
    store = dict(state.store)
    for name in sorted(cfa.modified_vars_in_loop(head)):
        store[name] = A.Var(fresh.make(name))
    out = replace(state, store=store, summarized=state.summarized | {head})
    for invariant in aux.get(head, []):
        guarded = assume_into(out, A.apply_store(invariant, store))
        if guarded is None:
            return None
        out = guarded
    return out


@dataclass
class Visit:
    """A property-location visit on a symbolic path."""

    state: SymState
    condition: A.BExp  # the property condition under the visit's store


@dataclass
class SegmentEnd:
    state: SymState
    location: int
    reached_target: bool


def concretize_trace(
    cfa: Cfa,
    trace: tuple[Edge, ...],
    havocs: tuple[tuple[int, str], ...],
    model: dict[str, int],
    prop: SafetyProperty,
):
    """Replay an edge list concretely using model values for the havocs.

    Returns a replay-verified counterexample ending at the final edge's
    target, or None if the model does not actually drive the path."""
    from ..semantics import Counterexample, Path, PathStep, initial_state, replay, step

    symtab = cfa.symtab
    havoc_by_index = {index: name for index, name in havocs}
    state = initial_state(symtab)
    steps: list = []
    for i, edge in enumerate(trace):
        steps.append(PathStep(dict(state), edge.source, edge.op))
        value = model.get(havoc_by_index.get(i, ""), 0) if isinstance(edge.op, Havoc) else None
        succ = step(state, edge.op, symtab, havoc_value=value)
        if succ is None:
            return None
        state = succ
    final_loc = trace[-1].target if trace else cfa.initial
    steps.append(PathStep(dict(state), final_loc, None))
    cex = Counterexample(Path(tuple(steps)), len(steps) - 1, prop)
    return cex if replay(cfa, cex) else None


def walk_segment(
    cfa: Cfa,
    start: list[tuple[int, SymState]],
    target_head: int | None,
    prop: SafetyProperty,
    fresh: FreshVars,
    aux: AuxInvariants,
    assume_property: bool,
    collect: list[Visit] | None,
    max_nodes: int = 20_000,
) -> list[SegmentEnd]:
    """Explore all paths from the start nodes until the target head or a
    terminal location.

    Callers must not place a start node directly on the target head (step
    the first edge themselves).  Property-location visits either extend the
    path condition (``assume_property=True``, the "so far violation free"
    hypothesis) or are recorded into ``collect`` as proof obligations.
    """
    ends: list[SegmentEnd] = []
    stack = list(start)
    expanded = 0
    while stack:
        loc, state = stack.pop()
        expanded += 1
        if expanded > max_nodes:
            raise PathBudgetExceeded(f"segment walk exceeded {max_nodes} nodes")
        if loc == prop.location:
            applied = A.apply_store(prop.condition, state.store)
            if assume_property:
                guarded = assume_into(state, applied)
                if guarded is None:
                    continue
                state = guarded
            elif collect is not None:
                collect.append(Visit(state, applied))
        if target_head is not None and loc == target_head:
            ends.append(SegmentEnd(state, loc, True))
            continue
        if loc in cfa.loop_heads:
            if loc in state.summarized:
                continue
            summarized = summarize_head(state, loc, cfa, fresh, aux)
            if summarized is None:
                continue
            state = summarized
        edges = cfa.outgoing(loc)
        if not edges:
            ends.append(SegmentEnd(state, loc, False))
            continue
        for edge in edges:
            succ = apply_edge(state, edge, fresh)
            if succ is not None:
                stack.append((edge.target, succ))
    return ends


def body_rounds(
    cfa: Cfa,
    head: int,
    states: list[SymState],
    prop: SafetyProperty,
    fresh: FreshVars,
    aux: AuxInvariants,
    assume_property: bool,
    collect: list[Visit] | None,
    max_nodes: int = 20_000,
) -> list[SymState]:
    """One loop iteration of ``head`` from each state: take the loop-enter
    edges and walk until the next arrival at the head.  Inner loops are
    summarized.  Returns the arrival states."""
    enter_edges = [
        e for e in cfa.outgoing(head) if isinstance(e.op, Assume) and e.op.value
    ]
    start: list[tuple[int, SymState]] = []
    for state in states:
        cleared = replace(state, summarized=frozenset())
        for edge in enter_edges:
            succ = apply_edge(cleared, edge, fresh)
            if succ is not None:
                start.append((edge.target, succ))
    # An empty loop body re-arrives immediately.
    arrivals: list[SymState] = [s for loc, s in start if loc == head]
    remaining = [(loc, s) for loc, s in start if loc != head]
    ends = walk_segment(
        cfa, remaining, head, prop, fresh, aux, assume_property, collect, max_nodes
    )
    for end in ends:
        if end.reached_target:
            arrivals.append(end.state)
    return arrivals


def exit_walk(
    cfa: Cfa,
    head: int,
    states: list[SymState],
    prop: SafetyProperty,
    fresh: FreshVars,
    aux: AuxInvariants,
    collect: list[Visit],
    max_nodes: int = 20_000,
) -> None:
    """Walk the continuations of ``head`` that leave the loop, collecting
    property obligations.  Paths that would re-arrive at the head are pruned:
    they are covered by the induction hypothesis anchored one round later."""
    exit_edges = [
        e for e in cfa.outgoing(head) if not (isinstance(e.op, Assume) and e.op.value)
    ]
    start: list[tuple[int, SymState]] = []
    for state in states:
        cleared = replace(state, summarized=frozenset())
        for edge in exit_edges:
            succ = apply_edge(cleared, edge, fresh)
            if succ is not None:
                start.append((edge.target, succ))
    walk_segment(cfa, start, head, prop, fresh, aux, False, collect, max_nodes)
