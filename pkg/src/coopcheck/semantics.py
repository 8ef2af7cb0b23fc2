"""Concrete execution semantics: states, paths, and the brute-force oracle.

A state maps every declared variable to a canonical machine value; the
initial state assigns 0 everywhere.  ``brute_force_verify`` runs an
explicit-state BFS over all nondeterministic input resolutions and acts as
ground truth in tests; ``replay`` validates counterexamples against the
edge relation and the property.  Division by zero blocks a transition
instead of aborting, so the path set stays well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .lang.cfa import Assign, Assume, Call, Cfa, ErrorLabel, Havoc, Operation, ReturnOp, SafetyProperty
from .logic import ast as A
from .logic.evaluate import eval_expr
from .logic.machine import EvalFault, SymbolTable

State = dict[str, int]


class VerdictStatus(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class PathStep:
    state: State
    location: int
    op: Operation | None  # None only on the final step


@dataclass(frozen=True)
class Path:
    steps: tuple[PathStep, ...]


@dataclass(frozen=True)
class Counterexample:
    path: Path
    violated_at: int
    prop: SafetyProperty


@dataclass
class OracleVerdict:
    status: VerdictStatus
    counterexample: Counterexample | None = None
    states_explored: int = 0
    reason: str = ""


def initial_state(symtab: SymbolTable) -> State:
    return {name: 0 for name in symtab.variables}


def eval_in_state(state: State, expr: A.Expr, symtab: SymbolTable):
    """Expression evaluation over a state (faults propagate as EvalFault)."""
    return eval_expr(expr, state, symtab)


def step(state: State, op: Operation, symtab: SymbolTable, havoc_value: int | None = None) -> State | None:
    """One operation step; ``None`` means the transition is blocked.

    Havoc needs an explicit resolution value from the caller; assume blocks
    when its guard is false; calls, returns and error labels leave the state
    unchanged.
    """
    try:
        if isinstance(op, Assume):
            return state if eval_expr(op.effective, state, symtab) else None
        if isinstance(op, Assign):
            value = eval_expr(op.expr, state, symtab)
            new = dict(state)
            new[op.target] = value
            return new
        if isinstance(op, Havoc):
            if havoc_value is None:
                raise ValueError("havoc step requires an explicit value")
            new = dict(state)
            new[op.target] = symtab.wrap(havoc_value)
            return new
        if isinstance(op, (Call, ReturnOp, ErrorLabel)):
            return state
    except EvalFault:
        return None
    raise TypeError(f"unknown operation {op!r}")


def _freeze(state: State) -> tuple:
    return tuple(sorted(state.items()))


def brute_force_verify(
    cfa: Cfa,
    prop: SafetyProperty,
    width: int | None = None,
    budget: int = 2_000_000,
) -> OracleVerdict:
    """Explicit-state BFS over every input resolution.

    Returns FALSE with a shortest counterexample, TRUE when the full state
    space was exhausted without a violation, or UNKNOWN when the budget ran
    out first.
    """
    if width is not None:
        cfa = cfa.with_width(width)
    symtab = cfa.symtab
    init = initial_state(symtab)
    start = (cfa.initial, _freeze(init))
    # parent: node -> (prev node, op, havoc value) for counterexample rebuild
    parent: dict[tuple, tuple | None] = {start: None}
    queue = [start]
    explored = 0

    def violates(loc: int, state: State) -> bool:
        if loc != prop.location:
            return False
        try:
            return eval_expr(prop.condition, state, symtab) is False
        except EvalFault:
            return False

    def rebuild(node: tuple) -> Counterexample:
        chain = []
        cursor: tuple | None = node
        while cursor is not None:
            chain.append(cursor)
            entry = parent[cursor]
            cursor = entry[0] if entry else None
        chain.reverse()
        steps = []
        for i, (loc, frozen) in enumerate(chain):
            op = parent[chain[i + 1]][1] if i + 1 < len(chain) else None
            steps.append(PathStep(dict(frozen), loc, op))
        violated = next(i for i, s in enumerate(steps) if violates(s.location, s.state))
        return Counterexample(Path(tuple(steps)), violated, prop)

    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        explored += 1
        if explored > budget:
            return OracleVerdict(VerdictStatus.UNKNOWN, states_explored=explored, reason="state budget exceeded")
        loc, frozen = node
        state = dict(frozen)
        if violates(loc, state):
            return OracleVerdict(VerdictStatus.FALSE, rebuild(node), explored)
        for edge in cfa.outgoing(loc):
            if isinstance(edge.op, Havoc):
                for value in range(1 << symtab.width):
                    succ_state = step(state, edge.op, symtab, havoc_value=value)
                    assert succ_state is not None
                    succ = (edge.target, _freeze(succ_state))
                    if succ not in parent:
                        parent[succ] = (node, edge.op, value)
                        queue.append(succ)
            else:
                succ_state = step(state, edge.op, symtab)
                if succ_state is None:
                    continue
                succ = (edge.target, _freeze(succ_state))
                if succ not in parent:
                    parent[succ] = (node, edge.op, None)
                    queue.append(succ)
    return OracleVerdict(VerdictStatus.TRUE, states_explored=explored)


def reachable_states_at(cfa: Cfa, location: int, budget: int = 2_000_000) -> list[State] | None:
    """All reachable states at ``location`` (None when the budget is hit)."""
    symtab = cfa.symtab
    init = initial_state(symtab)
    start = (cfa.initial, _freeze(init))
    seen = {start}
    queue = [start]
    found: list[State] = []
    head = 0
    while head < len(queue):
        loc, frozen = queue[head]
        head += 1
        if len(seen) > budget:
            return None
        state = dict(frozen)
        if loc == location:
            found.append(state)
        for edge in cfa.outgoing(loc):
            if isinstance(edge.op, Havoc):
                succs = [step(state, edge.op, symtab, havoc_value=v) for v in range(1 << symtab.width)]
            else:
                succs = [step(state, edge.op, symtab)]
            for succ_state in succs:
                if succ_state is None:
                    continue
                succ = (edge.target, _freeze(succ_state))
                if succ not in seen:
                    seen.add(succ)
                    queue.append(succ)
    return found


def holds_at(cfa: Cfa, invariant: A.BExp, location: int, budget: int = 2_000_000) -> bool | None:
    """Whether the expression holds in every reachable state at ``location``.

    The BFS-based ground truth for loop-invariant claims; None when the state
    budget is exhausted.
    """
    states = reachable_states_at(cfa, location, budget)
    if states is None:
        return None
    for state in states:
        try:
            if eval_expr(invariant, state, cfa.symtab) is False:
                return False
        except EvalFault:
            continue
    return True


def replay(cfa: Cfa, cex: Counterexample) -> bool:
    """True iff the counterexample is a genuine violating path of the CFA."""
    steps = cex.path.steps
    if not steps:
        return False
    symtab = cfa.symtab
    if steps[0].location != cfa.initial:
        return False
    if steps[0].state != initial_state(symtab):
        return False
    for i in range(len(steps) - 1):
        cur, nxt = steps[i], steps[i + 1]
        if cur.op is None:
            return False
        edge = next(
            (
                e
                for e in cfa.outgoing(cur.location)
                if e.target == nxt.location and str(e.op) == str(cur.op)
            ),
            None,
        )
        if edge is None:
            return False
        havoc_value = nxt.state.get(cur.op.target) if isinstance(cur.op, Havoc) else None
        succ = step(cur.state, cur.op, symtab, havoc_value=havoc_value)
        if succ is None or succ != nxt.state:
            return False
    if not 0 <= cex.violated_at < len(steps):
        return False
    at = steps[cex.violated_at]
    if at.location != cex.prop.location:
        return False
    try:
        return eval_expr(cex.prop.condition, at.state, symtab) is False
    except EvalFault:
        return False


# --------------------------------------------------------------------------
# Plain-text trace format: one line per step, "location | operation | x=1,y=2"
# --------------------------------------------------------------------------


def format_trace(cex: Counterexample) -> str:
    lines = [f"# violated_at {cex.violated_at} property {cex.prop.location} | {A.to_source(cex.prop.condition)}"]
    for s in cex.path.steps:
        op_text = str(s.op) if s.op is not None else "-"
        vals = ",".join(f"{k}={v}" for k, v in sorted(s.state.items()))
        lines.append(f"{s.location} | {op_text} | {vals}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str, cfa: Cfa) -> Counterexample:
    """Parse the plain-text trace format back into a counterexample.

    Operations are matched against the CFA's edges by their printed form.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("trace must start with a '# violated_at' header")
    header = lines[0][1:].split()
    violated_at = int(header[1])
    prop_loc = int(header[3])
    cond_text = lines[0].split("|", 1)[1].strip()
    from .logic.parser import parse_expression

    prop = SafetyProperty(prop_loc, parse_expression(cond_text))
    steps: list[PathStep] = []
    by_str: dict[tuple[int, str], Operation] = {}
    for e in cfa.edges:
        by_str[(e.source, str(e.op))] = e.op
    for ln in lines[1:]:
        loc_text, op_text, vals_text = (part.strip() for part in ln.split("|", 2))
        loc = int(loc_text)
        op = None if op_text == "-" else by_str.get((loc, op_text))
        if op_text != "-" and op is None:
            raise ValueError(f"no edge at location {loc} with operation {op_text!r}")
        state: State = {}
        if vals_text:
            for pair in vals_text.split(","):
                name, _, value = pair.partition("=")
                state[name.strip()] = int(value)
        steps.append(PathStep(state, loc, op))
    return Counterexample(Path(tuple(steps)), violated_at, prop)
