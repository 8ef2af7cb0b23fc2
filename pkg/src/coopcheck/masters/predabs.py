"""Predicate-abstraction master with CEGAR-style refinement.

Abstractions are computed at loop heads and at the property location; in
between, formulas propagate exactly along acyclic CFA segments.  Abstract
regions are Cartesian: each precision predicate is kept positively or
negatively when the entailment check proves it, and left unconstrained when
the check is unknown, so regions always over-approximate.  Spurious abstract
counterexamples are replayed concretely over the full edge trace; infeasible
ones contribute new predicates harvested from path atoms and
weakest-precondition images.  Injected witness predicates are split into
conjuncts and added to the precision of their loop head and of the property
location; affected subtrees of the reachability graph are re-explored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from ..lang.cfa import Assign, Assume, Call, Cfa, Edge, ErrorLabel, Havoc, Operation, ReturnOp, SafetyProperty
from ..logic import ast as A
from ..logic.validity import ValidityChecker
from ..semantics import Counterexample, VerdictStatus
from ..verdict import VerifierVerdict
from ..witness.matching import match_to_cfa, witness_from_invariants
from ..witness.model import LocatedInvariant, Witness
from .base import AnalysisInterrupted, MasterBase, MasterOptions, split_candidates
from .symexec import FreshVars, SymState, apply_edge, concretize_trace, identity_store, zero_store

logger = logging.getLogger("coopcheck.masters.predabs")

PRODUCER = "coopcheck-predabs"

Literal = tuple[str, bool]  # (printed predicate, polarity)


@dataclass
class PredAbsOptions(MasterOptions):
    max_refinements: int = 40
    injection_poll_every: int = 16  # node expansions between inbox polls


@dataclass
class Precision:
    """Conjunction-free predicates per location class (loop heads and the
    property location)."""

    by_location: dict[int, list[A.BExp]] = field(default_factory=dict)

    def at(self, location: int) -> list[A.BExp]:
        return self.by_location.get(location, [])

    def add(self, location: int, predicate: A.BExp) -> bool:
        for part in A.split_conjunctions(predicate):
            if A.is_trivial(part):
                continue
            bucket = self.by_location.setdefault(location, [])
            if A.to_source(part) not in {A.to_source(p) for p in bucket}:
                bucket.append(part)
                return True
        return False

    def add_all(self, location: int, predicates: Iterable[A.BExp]) -> set[int]:
        changed = set()
        for p in predicates:
            if self.add(location, p):
                changed.add(location)
        return changed

    def snapshot(self) -> dict[int, list[str]]:
        return {loc: [A.to_source(p) for p in preds] for loc, preds in self.by_location.items()}


def inject_predicates(prec: Precision, witnesses: list[Witness], cfa: Cfa, prop_location: int | None = None) -> set[int]:
    """Split each matched invariant into conjuncts and add them to the
    precision of its loop head (and the property class).  No validation:
    wrong predicates cannot make the abstraction unsound, only slower."""
    changed: set[int] = set()
    for w in witnesses:
        try:
            match = match_to_cfa(w, cfa, force=True)
        except Exception as exc:
            logger.warning("predabs: skipping witness (%s)", exc)
            continue
        for note in match.diagnostics:
            logger.info("predabs: witness: %s", note)
        for li in match.invariants:
            for part in A.split_conjunctions(li.invariant):
                if A.is_trivial(part):
                    continue
                if prec.add(li.loop_head, part):
                    changed.add(li.loop_head)
                if prop_location is not None and prec.add(prop_location, part):
                    changed.add(prop_location)
    return changed


def _cartesian(
    state: SymState,
    predicates: list[A.BExp],
    symtab,
    checker: ValidityChecker,
    tick=None,
) -> frozenset[Literal]:
    """Strongest Cartesian region: per predicate keep it, keep its negation,
    or leave it unconstrained when neither entailment can be proven."""
    condition = state.condition()
    literals: set[Literal] = set()
    for pred in predicates:
        if tick is not None:
            tick()
        applied = A.apply_store(pred, state.store)
        if checker.valid(A.Implies(condition, applied), symtab).is_valid:
            literals.add((A.to_source(pred), True))
        elif checker.valid(A.Implies(condition, A.negate(applied)), symtab).is_valid:
            literals.add((A.to_source(pred), False))
    return frozenset(literals)


def _region_expr(literals: frozenset[Literal], extra: list[A.BExp] | None = None) -> A.BExp:
    from ..logic.parser import parse_expression

    parts = [
        parse_expression(text) if polarity else A.negate(parse_expression(text))
        for text, polarity in sorted(literals)
    ]
    if extra:
        parts.extend(extra)
    return A.conjoin(parts)


def abstract_post(
    region: A.BExp,
    ops: Union[Operation, Sequence[Operation]],
    prec: list[A.BExp],
    symtab,
    checker: ValidityChecker | None = None,
) -> A.BExp:
    """Cartesian post-image of a region through one operation or a straight
    operation sequence, over the given predicates.

    The result over-approximates: every concrete successor of a state in the
    region satisfies it.  An unsatisfied guard sequence yields ``false``."""
    checker = checker or ValidityChecker()
    if isinstance(ops, (Assume, Assign, Havoc, Call, ReturnOp, ErrorLabel)):
        ops = [ops]
    fresh = FreshVars(symtab)
    state: SymState | None = SymState(store=identity_store(symtab))
    from .symexec import assume_into

    state = assume_into(state, region)
    if state is not None:
        for i, op in enumerate(ops):
            state = apply_edge(state, Edge(-1, op, -1, 0), fresh)
            if state is None:
                break
    if state is None:
        return A.FALSE
    literals = _cartesian(state, prec, fresh.extended_symtab(), checker)
    return _region_expr(literals)


# ---------------------------------------------------------------------------
# Abstract reachability graph
# ---------------------------------------------------------------------------


@dataclass
class ArgNode:
    node_id: int
    location: int
    literals: frozenset[Literal]
    parent: int | None
    incoming: SymState | None  # segment from the parent's region (trace kept)
    extra: list[A.BExp] = field(default_factory=list)  # sound add-ons (property at safe checks)
    covered_by: int | None = None

    def region(self) -> A.BExp:
        return _region_expr(self.literals, self.extra)


@dataclass
class AbstractCounterexample:
    """Chain of segment traces from the initial location to a property visit
    whose region does not entail the property."""

    edges: tuple[Edge, ...]
    node_chain: tuple[int, ...]


class _FoundAbstractCex(Exception):
    def __init__(self, cex: AbstractCounterexample):
        self.cex = cex


@dataclass
class RefinementResult:
    kind: str  # "feasible" | "new_predicates" | "stuck" | "unknown"
    counterexample: Counterexample | None = None
    new_predicates: dict[int, list[A.BExp]] = field(default_factory=dict)


def cegar_refine(
    cex: AbstractCounterexample,
    prec: Precision,
    cfa: Cfa,
    prop: SafetyProperty,
    checker: ValidityChecker | None = None,
) -> RefinementResult:
    """Concretely replay an abstract counterexample path.

    A satisfiable path constraint yields a genuine counterexample; an
    infeasible one yields predicates from the path's atoms and backward
    weakest-precondition images, targeted at the loop heads along the path
    and the property location."""
    checker = checker or ValidityChecker()
    fresh = FreshVars(cfa.symtab)
    state: SymState | None = SymState(store=zero_store(cfa.symtab))
    for edge in cex.edges:
        state = apply_edge(state, edge, fresh)
        if state is None:
            break
    feasible_formula = None
    if state is not None:
        bad = A.negate(A.apply_store(prop.condition, state.store))
        feasible_formula = A.conjoin(list(state.constraints) + [bad])
        result = checker.valid(A.negate(feasible_formula), fresh.extended_symtab())
        if result.is_counter:
            assert result.model is not None
            concrete = concretize_trace(cfa, cex.edges, state.havocs, result.model, prop)
            if concrete is not None:
                return RefinementResult("feasible", counterexample=concrete)
            logger.warning("predabs: non-replaying counterexample candidate dropped")
            return RefinementResult("unknown")
        if result.is_unknown:
            return RefinementResult("unknown")

    # infeasible: harvest predicates
    pool: list[A.BExp] = []
    seen: set[str] = set()
    program_vars = set(cfa.symtab.variables)

    def push(expr: A.BExp) -> None:
        folded = A.fold(expr)
        if isinstance(folded, A.BoolLit):
            return
        if not A.free_vars(folded) <= program_vars:
            return
        text = A.to_source(folded)
        if text not in seen:
            seen.add(text)
            pool.append(folded)

    wp: A.BExp = A.negate(prop.condition)
    wp_counter = 0
    for atom in A.atoms(wp):
        push(atom)
    for edge in reversed(cex.edges):
        op = edge.op
        if isinstance(op, Assign):
            wp = A.substitute(wp, op.target, op.expr)
        elif isinstance(op, Havoc):
            wp_counter += 1
            wp = A.substitute(wp, op.target, A.Var(f"{op.target}%wp{wp_counter}"))
        elif isinstance(op, Assume):
            for atom in A.atoms(op.effective):
                push(atom)
        for atom in A.atoms(wp):
            push(atom)

    targets = {prop.location}
    for edge in cex.edges:
        for loc in (edge.source, edge.target):
            if loc in cfa.loop_heads:
                targets.add(loc)
    new: dict[int, list[A.BExp]] = {}
    for target in sorted(targets):
        existing = {A.to_source(p) for p in prec.at(target)}
        fresh_preds = [p for p in pool if A.to_source(p) not in existing]
        if fresh_preds:
            new[target] = fresh_preds
    if not new:
        return RefinementResult("stuck")
    return RefinementResult("new_predicates", new_predicates=new)


class PredicateAbstractionMaster(MasterBase):
    name = "predabs"

    def __init__(self, cfa: Cfa, prop: SafetyProperty, options: PredAbsOptions | None = None):
        super().__init__(cfa, prop, options or PredAbsOptions())
        self.precision = Precision()
        self._abstraction_points = frozenset(cfa.loop_heads) | {prop.location}
        self._nodes: dict[int, ArgNode] = {}
        self._children: dict[int, list[int]] = {}
        self._next_id = 0

    # -- exploration -------------------------------------------------------

    def _segments(self, start_loc: int, start_state: SymState) -> list[tuple[int, SymState]]:
        """Exact propagation from an abstraction point to the next ones.
        Segments are acyclic because every cycle crosses a loop head."""
        arrivals: list[tuple[int, SymState]] = []
        stack: list[tuple[int, SymState]] = []
        for edge in self.cfa.outgoing(start_loc):
            succ = apply_edge(start_state, edge, self._fresh)
            if succ is not None:
                stack.append((edge.target, succ))
        while stack:
            loc, state = stack.pop()
            if loc in self._abstraction_points:
                arrivals.append((loc, state))
                continue
            for edge in self.cfa.outgoing(loc):
                succ = apply_edge(state, edge, self._fresh)
                if succ is not None:
                    stack.append((edge.target, succ))
        return arrivals

    def _new_node(self, location: int, literals: frozenset[Literal], parent: int | None, incoming: SymState | None, extra: list[A.BExp]) -> ArgNode:
        node = ArgNode(self._next_id, location, literals, parent, incoming, extra)
        self._nodes[node.node_id] = node
        self._children[node.node_id] = []
        if parent is not None:
            self._children[parent].append(node.node_id)
        self._next_id += 1
        return node

    def _find_coverer(self, location: int, literals: frozenset[Literal]) -> int | None:
        """A node whose (weaker or equal) region subsumes the new arrival.
        Chains of coverage are fine: they bottom out at an explored node."""
        for other in self._nodes.values():
            if other.location == location and other.literals <= literals:
                return other.node_id
        return None

    def _uncover_dependents(self, node_id: int, waitlist: list[int], removed: bool) -> None:
        node = self._nodes.get(node_id)
        for other in self._nodes.values():
            if other.covered_by != node_id:
                continue
            still_covered = (
                not removed
                and node is not None
                and node.literals <= other.literals
            )
            if not still_covered:
                other.covered_by = None
                if other.node_id not in waitlist:
                    waitlist.append(other.node_id)

    def _chain_edges(self, node_id: int, tail: SymState) -> AbstractCounterexample:
        chain: list[int] = []
        edges: list[Edge] = []
        cursor: int | None = node_id
        while cursor is not None:
            chain.append(cursor)
            node = self._nodes[cursor]
            if node.incoming is not None:
                edges = list(node.incoming.trace) + edges
            cursor = node.parent
        chain.reverse()
        return AbstractCounterexample(tuple(edges) + tail.trace, tuple(chain))

    def _expand(self, node: ArgNode, waitlist: list[int]) -> None:
        """Explore one node: run its outgoing segments, abstract the arrivals."""
        if node.parent is None:
            start_state = SymState(store=zero_store(self.cfa.symtab))
        else:
            start_state = SymState(store=identity_store(self.cfa.symtab))
            from .symexec import assume_into

            seeded = assume_into(start_state, node.region())
            if seeded is None:
                return
            start_state = seeded
        symtab_for = self._fresh.extended_symtab
        for loc, state in self._segments(node.location, start_state):
            self.tick()
            if loc == self.prop.location:
                applied = A.apply_store(self.prop.condition, state.store)
                ok = self.checker.valid(A.Implies(state.condition(), applied), symtab_for())
                if not ok.is_valid:
                    raise _FoundAbstractCex(self._chain_edges(node.node_id, state))
                extra = [self.prop.condition]
            else:
                extra = []
            literals = _cartesian(state, self.precision.at(loc), symtab_for(), self.checker, self.tick)
            coverer = self._find_coverer(loc, literals)
            child = self._new_node(loc, literals, node.node_id, state, extra)
            if coverer is not None:
                child.covered_by = coverer
            else:
                waitlist.append(child.node_id)

    def _remove_subtree(self, node_id: int, waitlist: list[int]) -> None:
        for child_id in list(self._children.get(node_id, [])):
            self._remove_subtree(child_id, waitlist)
        self._nodes.pop(node_id, None)
        self._children.pop(node_id, None)
        if node_id in waitlist:
            waitlist.remove(node_id)
        self._uncover_dependents(node_id, waitlist, removed=True)

    def _apply_injection(self, changed_heads: set[int], waitlist: list[int]) -> None:
        """Lazy re-exploration: recompute abstractions of nodes at affected
        heads, drop their subtrees, and release arrivals whose coverage the
        strengthened regions no longer justify."""
        affected = [n for n in list(self._nodes.values()) if n.location in changed_heads and n.parent is not None]
        for node in affected:
            if node.node_id not in self._nodes:
                continue  # already removed as a descendant
            assert node.incoming is not None
            new_literals = _cartesian(
                node.incoming, self.precision.at(node.location), self._fresh.extended_symtab(), self.checker, self.tick
            )
            if new_literals == node.literals:
                continue
            for child_id in list(self._children.get(node.node_id, [])):
                self._remove_subtree(child_id, waitlist)
            node.literals = new_literals
            self._uncover_dependents(node.node_id, waitlist, removed=False)
            if node.covered_by is None and node.node_id not in waitlist:
                waitlist.append(node.node_id)

    def _poll_injection(self, waitlist: list[int] | None) -> bool:
        witnesses = self.drain_inbox()
        if not witnesses:
            return False
        changed = inject_predicates(self.precision, witnesses, self.cfa, self.prop.location)
        if changed and waitlist is not None:
            self._apply_injection(changed, waitlist)
        return bool(changed)

    def _explore(self) -> AbstractCounterexample | None:
        """Run the abstract reachability fixpoint; None means safe."""
        options: PredAbsOptions = self.options  # type: ignore[assignment]
        self._nodes.clear()
        self._children.clear()
        self._next_id = 0
        self._fresh = FreshVars(self.cfa.symtab)
        root = self._new_node(self.cfa.initial, frozenset(), None, None, [])
        waitlist = [root.node_id]
        expansions = 0
        try:
            while waitlist:
                self.tick()
                expansions += 1
                if expansions % options.injection_poll_every == 0:
                    self._poll_injection(waitlist)
                node_id = waitlist.pop(0)
                node = self._nodes.get(node_id)
                if node is None or node.covered_by is not None:
                    continue
                self._expand(node, waitlist)
        except _FoundAbstractCex as found:
            return found.cex
        return None

    # -- main loop -----------------------------------------------------------

    def run(self, timer: float | None = None, deadline: float | None = None) -> VerifierVerdict:
        self.prepare_run(timer, deadline)
        options: PredAbsOptions = self.options  # type: ignore[assignment]
        refinements = 0
        try:
            self._poll_injection(None)
            while True:
                self.tick()
                abstract_cex = self._explore()
                if abstract_cex is None:
                    logger.info("%s: refinements=%d status=safe-fixpoint", self.name, refinements)
                    return VerifierVerdict(
                        VerdictStatus.TRUE,
                        witness=self._overall_witness(),
                        reason=f"abstract fixpoint after {refinements} refinements",
                        stats=self._stats(refinements),
                    )
                refinement = cegar_refine(abstract_cex, self.precision, self.cfa, self.prop, self.checker)
                if refinement.kind == "feasible":
                    logger.info("%s: refinements=%d status=counterexample", self.name, refinements)
                    return VerifierVerdict(
                        VerdictStatus.FALSE,
                        counterexample=refinement.counterexample,
                        reason="feasible abstract counterexample",
                        stats=self._stats(refinements),
                    )
                if refinement.kind == "new_predicates" and refinements < options.max_refinements:
                    refinements += 1
                    for loc, preds in refinement.new_predicates.items():
                        self.precision.add_all(loc, preds)
                    logger.info(
                        "%s: refinements=%d status=refined (+%d predicates)",
                        self.name,
                        refinements,
                        sum(len(v) for v in refinement.new_predicates.values()),
                    )
                    continue
                # stuck / unknown / refinement budget: only injections help now
                reason = {
                    "stuck": "no new predicates derivable",
                    "unknown": "path feasibility undecided",
                }.get(refinement.kind, f"refinement budget ({options.max_refinements}) exhausted")
                witnesses = self.wait_for_injection()
                if not witnesses:
                    logger.info("%s: refinements=%d status=unknown", self.name, refinements)
                    return VerifierVerdict(
                        VerdictStatus.UNKNOWN, reason=reason, stats=self._stats(refinements)
                    )
                changed = inject_predicates(self.precision, witnesses, self.cfa, self.prop.location)
                if changed:
                    logger.info("%s: injected predicates at %s", self.name, sorted(changed))
        except AnalysisInterrupted as interrupt:
            return interrupt.verdict

    def _overall_witness(self) -> Witness:
        per_head: dict[int, list[A.BExp]] = {}
        for node in self._nodes.values():
            if node.location in self.cfa.loop_heads:
                per_head.setdefault(node.location, []).append(node.region())
        located = []
        for head, regions in sorted(per_head.items()):
            invariant = A.fold(A.disjoin(regions))
            if not A.is_trivial(invariant):
                located.append(LocatedInvariant(head, invariant, PRODUCER))
        return witness_from_invariants(self.cfa, located, PRODUCER)

    def _stats(self, refinements: int) -> dict:
        return {
            "refinements": refinements,
            "predicates": sum(len(v) for v in self.precision.by_location.values()),
            "arg_nodes": len(self._nodes),
            "validity_queries": self.checker.stats["queries"],
        }
