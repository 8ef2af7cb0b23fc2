"""Matching witnesses against CFAs and building witnesses from invariants.

Matching simulates the witness automaton jointly with the CFA: a transition
fires on a CFA edge when its line span covers the edge's line and its guard
type fits (``enterLoopHead`` for edges into loop heads, ``then``/``else``
for the two assume polarities, ``enterFunc`` for call edges).  The ``o/w``
guard has the lowest priority and fires only when no sibling guard matches;
when nothing matches at all the witness state stutters.  Invariants are
collected exactly at (state, loop head) pairs of the joint exploration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..lang.cfa import Assume, Call, Cfa, Edge
from ..logic import ast as A
from ..logic.ast import is_trivial
from .model import (
    GuardType,
    LocatedInvariant,
    SourceCodeGuard,
    Transition,
    Witness,
    WitnessState,
    base_metadata,
)


class WitnessMatchError(Exception):
    pass


@dataclass
class MatchResult:
    invariants: list[LocatedInvariant]
    diagnostics: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.invariants)


def _type_matches(guard: SourceCodeGuard, edge: Edge, cfa: Cfa) -> bool:
    if guard.guard_type is GuardType.ENTER_LOOP_HEAD:
        return edge.target in cfa.loop_heads
    if guard.guard_type is GuardType.THEN:
        return isinstance(edge.op, Assume) and edge.op.value
    if guard.guard_type is GuardType.ELSE:
        return isinstance(edge.op, Assume) and not edge.op.value
    if guard.guard_type is GuardType.ENTER_FUNC:
        return isinstance(edge.op, Call) and (guard.function in (None, "", edge.op.name))
    return True  # OTHERWISE: line coverage alone, priority handled by caller


def _matching_targets(w: Witness, state_id: str, edge: Edge, cfa: Cfa) -> list[str]:
    covering = [t for t in w.transitions_from(state_id) if t.guard.covers(edge.line)]
    primary = [
        t for t in covering
        if t.guard.guard_type is not GuardType.OTHERWISE and _type_matches(t.guard, edge, cfa)
    ]
    if primary:
        return [t.target for t in primary]
    return [t.target for t in covering if t.guard.guard_type is GuardType.OTHERWISE]


def match_to_cfa(w: Witness, cfa: Cfa, force: bool = False) -> MatchResult:
    """Simulate the witness against the CFA and collect loop-head invariants.

    The witness program hash must match the CFA's program unless ``force``
    is set; an absent hash only produces a diagnostic.  Multiple witness
    states pairing with one loop head have their invariants conjoined.
    """
    diagnostics: list[str] = []
    recorded_hash = w.program_hash
    if recorded_hash is None:
        diagnostics.append("witness carries no program hash; matching by line numbers only")
    elif recorded_hash != cfa.source_hash:
        message = (
            f"witness program hash {recorded_hash} does not match the program ({cfa.source_hash})"
        )
        if not force:
            raise WitnessMatchError(message)
        diagnostics.append(message + "; matching forced")

    pairs = {(w.initial, cfa.initial)}
    worklist = [(w.initial, cfa.initial)]
    while worklist:
        state_id, loc = worklist.pop()
        for edge in cfa.outgoing(loc):
            targets = _matching_targets(w, state_id, edge, cfa) or [state_id]
            for target in targets:
                pair = (target, edge.target)
                if pair not in pairs:
                    pairs.add(pair)
                    worklist.append(pair)

    per_head: dict[int, list[A.BExp]] = {}
    sources: dict[int, str] = {}
    for state_id, loc in sorted(pairs):
        if loc not in cfa.loop_heads:
            continue
        state = w.states[state_id]
        if state.invariant is None or is_trivial(state.invariant):
            continue
        per_head.setdefault(loc, [])
        text = A.to_source(state.invariant)
        if all(A.to_source(existing) != text for existing in per_head[loc]):
            per_head[loc].append(state.invariant)
        sources[loc] = w.producer or "witness"

    invariants = [
        LocatedInvariant(head, A.conjoin(parts), sources[head]) for head, parts in sorted(per_head.items())
    ]
    if not invariants:
        nontrivial = [s.state_id for s in w.states.values() if s.invariant is not None and not is_trivial(s.invariant)]
        if nontrivial:
            diagnostics.append(
                f"no witness state with a non-trivial invariant was matched to a loop head "
                f"(unmatched states: {', '.join(sorted(nontrivial))})"
            )
    return MatchResult(invariants, diagnostics)


def witness_from_invariants(
    cfa: Cfa,
    invariants: list[LocatedInvariant],
    producer: str,
    scope: str | None = "main",
) -> Witness:
    """Construct a witness from the CFA skeleton with invariants attached to
    the loop-head states.  The result matches back to exactly the same
    non-trivial invariants."""
    per_head: dict[int, list[A.BExp]] = {}
    for li in invariants:
        if li.loop_head not in cfa.loop_heads:
            raise WitnessMatchError(f"location {li.loop_head} is not a loop head")
        per_head.setdefault(li.loop_head, []).append(li.invariant)

    def state_name(loc: int) -> str:
        return f"q{loc}"

    states: dict[str, WitnessState] = {}
    for loc in sorted(cfa.locations):
        invariant = A.conjoin(per_head[loc]) if loc in per_head else None
        states[state_name(loc)] = WitnessState(
            state_name(loc),
            invariant=invariant,
            scope=scope if invariant is not None else None,
        )
    transitions = []
    for edge in cfa.edges:
        if edge.target in cfa.loop_heads:
            guard_type = GuardType.ENTER_LOOP_HEAD
            function = None
        elif isinstance(edge.op, Assume):
            guard_type = GuardType.THEN if edge.op.value else GuardType.ELSE
            function = None
        elif isinstance(edge.op, Call):
            guard_type = GuardType.ENTER_FUNC
            function = edge.op.name
        else:
            guard_type = GuardType.OTHERWISE
            function = None
        guard = SourceCodeGuard(edge.line, edge.line, guard_type, function)
        transitions.append(Transition(state_name(edge.source), state_name(edge.target), guard))
    return Witness(
        states=states,
        initial=state_name(cfa.initial),
        transitions=tuple(transitions),
        metadata=base_metadata(cfa.source_hash, cfa.source_path, producer),
    )
