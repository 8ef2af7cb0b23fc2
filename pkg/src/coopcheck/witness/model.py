"""Correctness-witness automata.

A witness is a finite automaton whose transitions carry source-code guards
(line span plus a guard type) and whose states may carry a boolean invariant
with a scope.  A witness is trivial when every state invariant is absent or
folds to ``true``/``false``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

from ..logic import ast as A
from ..logic.ast import is_trivial

PRODUCER_NAME = "coopcheck"


class GuardType(Enum):
    THEN = "then"
    ELSE = "else"
    ENTER_FUNC = "enterFunc"
    ENTER_LOOP_HEAD = "enterLoopHead"
    OTHERWISE = "o/w"


@dataclass(frozen=True)
class SourceCodeGuard:
    startline: int
    endline: int
    guard_type: GuardType
    function: str | None = None  # only for ENTER_FUNC

    def __post_init__(self) -> None:
        if self.startline > self.endline:
            raise ValueError(f"guard span {self.startline}..{self.endline} is empty")

    def covers(self, line: int) -> bool:
        return self.startline <= line <= self.endline

    def __str__(self) -> str:
        span = str(self.startline) if self.startline == self.endline else f"{self.startline}-{self.endline}"
        return f"{span},{self.guard_type.value}"


@dataclass(frozen=True)
class WitnessState:
    state_id: str
    invariant: A.BExp | None = None
    scope: str | None = None
    extras: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: SourceCodeGuard
    extras: tuple[tuple[str, str], ...] = ()


@dataclass
class Witness:
    states: dict[str, WitnessState]
    initial: str
    transitions: tuple[Transition, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.initial not in self.states:
            raise WitnessFormatError(f"initial state {self.initial!r} does not exist")
        for t in self.transitions:
            for endpoint in (t.source, t.target):
                if endpoint not in self.states:
                    raise WitnessFormatError(f"transition endpoint {endpoint!r} does not exist")

    @property
    def producer(self) -> str:
        return self.metadata.get("producer", "")

    @property
    def program_hash(self) -> str | None:
        return self.metadata.get("programhash")

    def transitions_from(self, state_id: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == state_id]


class WitnessFormatError(Exception):
    pass


@dataclass(frozen=True)
class LocatedInvariant:
    """An invariant pinned to a loop head of a matched CFA."""

    loop_head: int
    invariant: A.BExp
    source: str = PRODUCER_NAME

    def __str__(self) -> str:
        return f"@{self.loop_head}: {A.to_source(self.invariant)} [{self.source}]"


def is_trivial_witness(w: Witness) -> bool:
    """All state invariants absent or syntactically ``true``/``false``."""
    for state in w.states.values():
        if state.invariant is not None and not is_trivial(state.invariant):
            return False
    return True


def base_metadata(program_hash: str | None, program_file: str | None, producer: str = PRODUCER_NAME) -> dict[str, str]:
    meta = {
        "witness-type": "correctness_witness",
        "producer": producer,
        "creationtime": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if program_file:
        meta["programfile"] = program_file
    if program_hash:
        meta["programhash"] = program_hash
    return meta
