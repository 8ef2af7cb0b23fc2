"""Control-flow automata: locations, operation-labelled edges, loop heads."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Union

from ..logic import ast as A
from ..logic.machine import SymbolTable


@dataclass(frozen=True)
class Assume:
    """Branch guard.  ``condition`` is the condition as written; ``value``
    selects the branch, so the effective guard is the condition itself on the
    true branch and its negation on the false branch."""

    condition: A.BExp
    value: bool

    @property
    def kind(self) -> str:
        return "assume"

    @property
    def effective(self) -> A.BExp:
        return self.condition if self.value else A.negate(self.condition)

    def __str__(self) -> str:
        return f"assume({A.to_source(self.effective)})"


@dataclass(frozen=True)
class Assign:
    target: str
    expr: A.AExp

    @property
    def kind(self) -> str:
        return "assign"

    def __str__(self) -> str:
        return f"{self.target} = {A.to_source(self.expr)}"


@dataclass(frozen=True)
class Havoc:
    target: str

    @property
    def kind(self) -> str:
        return "havoc"

    def __str__(self) -> str:
        return f"{self.target} = nondet()"


@dataclass(frozen=True)
class Call:
    name: str

    @property
    def kind(self) -> str:
        return "call"

    def __str__(self) -> str:
        return f"{self.name}()"


@dataclass(frozen=True)
class ReturnOp:
    @property
    def kind(self) -> str:
        return "return_"

    def __str__(self) -> str:
        return "return"


@dataclass(frozen=True)
class ErrorLabel:
    @property
    def kind(self) -> str:
        return "error_label"

    def __str__(self) -> str:
        return "error"


Operation = Union[Assume, Assign, Havoc, Call, ReturnOp, ErrorLabel]


@dataclass(frozen=True)
class Edge:
    source: int
    op: Operation
    target: int
    line: int

    def __str__(self) -> str:
        return f"{self.source} -[{self.op}]-> {self.target} @{self.line}"


@dataclass(frozen=True)
class SafetyProperty:
    """Required to hold whenever ``location`` is reached."""

    location: int
    condition: A.BExp

    def __str__(self) -> str:
        return f"({self.location}, {A.to_source(self.condition)})"


@dataclass
class Cfa:
    locations: frozenset[int]
    initial: int
    exit: int
    edges: tuple[Edge, ...]
    loop_heads: frozenset[int]
    line_map: dict[int, int]
    symtab: SymbolTable
    source_text: str
    source_path: str
    entry_function: str = "main"
    # loop head -> (first line, last line) of the loop statement it governs
    loop_spans: dict[int, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._out: dict[int, list[Edge]] = {loc: [] for loc in self.locations}
        self._in: dict[int, list[Edge]] = {loc: [] for loc in self.locations}
        for e in self.edges:
            self._out[e.source].append(e)
            self._in[e.target].append(e)
        self._doms: dict[int, set[int]] | None = None

    def outgoing(self, loc: int) -> list[Edge]:
        return self._out[loc]

    def incoming(self, loc: int) -> list[Edge]:
        return self._in[loc]

    @property
    def source_hash(self) -> str:
        return "sha256:" + hashlib.sha256(self.source_text.encode()).hexdigest()

    def with_width(self, width: int) -> "Cfa":
        """Same automaton over a different machine width."""
        if width == self.symtab.width:
            return self
        return Cfa(
            locations=self.locations,
            initial=self.initial,
            exit=self.exit,
            edges=self.edges,
            loop_heads=self.loop_heads,
            line_map=dict(self.line_map),
            symtab=self.symtab.with_width(width),
            source_text=self.source_text,
            source_path=self.source_path,
            entry_function=self.entry_function,
            loop_spans=dict(self.loop_spans),
        )

    def modified_vars_in_loop(self, head: int) -> frozenset[str]:
        """Variables assigned or havocked anywhere inside the natural loop
        of ``head`` (the strongly reachable body between head and its back
        edges)."""
        body = self.natural_loop(head)
        out: set[str] = set()
        for e in self.edges:
            if e.source in body and e.target in body:
                if isinstance(e.op, Assign):
                    out.add(e.op.target)
                elif isinstance(e.op, Havoc):
                    out.add(e.op.target)
        return frozenset(out)

    def natural_loop(self, head: int) -> frozenset[int]:
        """Locations of the natural loop of ``head``: the head plus every
        location that reaches a back edge source without passing the head."""
        back_sources = [e.source for e in self._in[head] if self._dominates(head, e.source)]
        body = {head}
        stack = list(back_sources)
        while stack:
            loc = stack.pop()
            if loc in body:
                continue
            body.add(loc)
            for e in self._in[loc]:
                stack.append(e.source)
        return frozenset(body)

    def _dominates(self, a: int, b: int) -> bool:
        if self._doms is None:
            self._doms = dominators(self)
        return a in self._doms.get(b, set())


def dominators(cfa: Cfa) -> dict[int, set[int]]:
    """Classic iterative dominator computation from the initial location."""
    reachable = set()
    stack = [cfa.initial]
    while stack:
        loc = stack.pop()
        if loc in reachable:
            continue
        reachable.add(loc)
        for e in cfa.outgoing(loc):
            stack.append(e.target)
    doms: dict[int, set[int]] = {loc: set(reachable) for loc in reachable}
    doms[cfa.initial] = {cfa.initial}
    changed = True
    while changed:
        changed = False
        for loc in reachable - {cfa.initial}:
            preds = [e.source for e in cfa.incoming(loc) if e.source in reachable]
            if not preds:
                new = {loc}
            else:
                new = set.intersection(*(doms[p] for p in preds)) | {loc}
            if new != doms[loc]:
                doms[loc] = new
                changed = True
    return doms


def detect_loop_heads(cfa_locations, initial, edges) -> frozenset[int]:
    """Natural-loop detection via dominators over raw edge data.

    Returns the targets of back edges.  Raises :class:`IrreducibleFlowError`
    when cycles remain after all back edges are removed, which cannot happen
    for programs built from structured loops but guards the invariant that
    every loop has an unambiguous head.
    """
    out: dict[int, list[int]] = {loc: [] for loc in cfa_locations}
    incoming: dict[int, list[int]] = {loc: [] for loc in cfa_locations}
    for src, dst in edges:
        out[src].append(dst)
        incoming[dst].append(src)
    reachable = set()
    stack = [initial]
    while stack:
        loc = stack.pop()
        if loc in reachable:
            continue
        reachable.add(loc)
        stack.extend(out[loc])
    doms: dict[int, set[int]] = {loc: set(reachable) for loc in reachable}
    doms[initial] = {initial}
    changed = True
    while changed:
        changed = False
        for loc in reachable - {initial}:
            preds = [p for p in incoming[loc] if p in reachable]
            new = (set.intersection(*(doms[p] for p in preds)) | {loc}) if preds else {loc}
            if new != doms[loc]:
                doms[loc] = new
                changed = True
    back_edges = [(src, dst) for src, dst in edges if src in reachable and dst in doms.get(src, set())]
    heads = frozenset(dst for _, dst in back_edges)
    # irreducibility check: removing back edges must leave the graph acyclic
    remaining: dict[int, list[int]] = {loc: [] for loc in cfa_locations}
    removed = set(back_edges)
    for src, dst in edges:
        if (src, dst) not in removed:
            remaining[src].append(dst)
    color: dict[int, int] = {}

    def has_cycle(node: int) -> bool:
        color[node] = 1
        for nxt in remaining[node]:
            state = color.get(nxt, 0)
            if state == 1:
                return True
            if state == 0 and has_cycle(nxt):
                return True
        color[node] = 2
        return False

    for loc in reachable:
        if color.get(loc, 0) == 0 and has_cycle(loc):
            raise IrreducibleFlowError("irreducible control flow: a cycle has no dominating head")
    return heads


class IrreducibleFlowError(Exception):
    pass
