"""k-induction master: bounded model checking plus an induction step
strengthened by auxiliary invariants.

BMC unrolls every path with at most k executions of each loop body and
discharges the reachability of a violating state through the validity
checker (nondeterministic inputs become fresh symbols); counterexamples are
rebuilt concretely and must replay.  The induction step shows, per loop head
that BMC had to truncate, that from any state satisfying the accepted
auxiliary invariants, k violation-free iterations cannot be followed by a
violating continuation (the (k+1)-th iteration or the loop exit).

Auxiliary invariants come from a built-in interval pass and from injected
witnesses; every candidate is validated (holds on loop entry, preserved by
one iteration, relative to previously accepted ones) before use, so wrong
candidates are filtered, never trusted.  The inbox is polled before each
induction step; when k is exhausted the master keeps waiting for injections
until the inbox is closed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

from ..lang.cfa import Assume, Cfa, SafetyProperty
from ..logic import ast as A
from ..logic.validity import Answer, ValidityChecker
from ..semantics import Counterexample, VerdictStatus
from ..verdict import VerifierVerdict
from ..witness.matching import witness_from_invariants
from ..witness.model import LocatedInvariant, Witness
from .base import AnalysisInterrupted, MasterBase, MasterOptions, split_candidates
from .symexec import (
    AuxInvariants,
    FreshVars,
    PathBudgetExceeded,
    SymState,
    Visit,
    apply_edge,
    body_rounds,
    concretize_trace,
    exit_walk,
    identity_store,
    walk_segment,
    zero_store,
)

logger = logging.getLogger("coopcheck.masters.kind")

PRODUCER = "coopcheck-kind"


@dataclass
class KInductionOptions(MasterOptions):
    k_max: int = 6
    use_interval_aux: bool = True


@dataclass
class KInductionState:
    """Bookkeeping of a running k-induction analysis."""

    current_k: int = 1
    proven_bound: int = 0
    aux_invariants: AuxInvariants = field(default_factory=dict)
    requests_help: bool = False


@dataclass
class BmcOutcome:
    status: str  # "safe" | "cex" | "unknown"
    counterexample: Counterexample | None = None
    truncated_heads: frozenset[int] = frozenset()
    exhausted: bool = False


def _violation_paths(cfa: Cfa, prop: SafetyProperty, k: int, fresh: FreshVars):
    """Unroll all paths bounded by k loop-body executions per head.

    Returns (violations, truncated_heads, complete) where each violation is a
    SymState whose trace ends at a property-location visit with the negated
    condition conjoined.
    """
    violations: list[SymState] = []
    truncated: set[int] = set()
    start = SymState(store=zero_store(cfa.symtab))
    stack: list[tuple[int, SymState, dict[int, int]]] = [(cfa.initial, start, {})]
    while stack:
        loc, state, counts = stack.pop()
        if loc == prop.location:
            applied = A.apply_store(prop.condition, state.store)
            bad = A.fold(A.negate(applied))
            if not (isinstance(bad, A.BoolLit) and not bad.value):
                violations.append(replace(state, constraints=state.constraints + (bad,)))
        for edge in cfa.outgoing(loc):
            new_counts = counts
            if isinstance(edge.op, Assume) and edge.op.value and loc in cfa.loop_heads:
                used = counts.get(loc, 0)
                if used >= k:
                    truncated.add(loc)
                    continue
                new_counts = dict(counts)
                new_counts[loc] = used + 1
            succ = apply_edge(state, edge, fresh)
            if succ is not None:
                stack.append((edge.target, succ, new_counts))
    return violations, frozenset(truncated), True


def _concretize(cfa: Cfa, violation: SymState, model: dict[str, int], prop: SafetyProperty) -> Counterexample | None:
    return concretize_trace(cfa, violation.trace, violation.havocs, model, prop)


def bmc_check(
    cfa: Cfa,
    prop: SafetyProperty,
    k: int,
    checker: ValidityChecker | None = None,
    tick=None,
) -> BmcOutcome:
    """All executions with at most k loop iterations per head are checked.

    ``exhausted`` is set when no path had to be truncated: the bound then
    covers the whole path set and a safe answer is unconditional.
    """
    checker = checker or ValidityChecker()
    fresh = FreshVars(cfa.symtab)
    violations, truncated, _ = _violation_paths(cfa, prop, k, fresh)
    symtab = fresh.extended_symtab()
    unknown = False
    for violation in sorted(violations, key=lambda v: len(v.trace)):
        if tick is not None:
            tick()
        result = checker.valid(A.negate(violation.condition()), symtab)
        if result.answer is Answer.COUNTER:
            assert result.model is not None
            cex = _concretize(cfa, violation, result.model, prop)
            if cex is None:
                logger.warning("discarding non-replaying counterexample candidate")
                unknown = True
                continue
            return BmcOutcome("cex", counterexample=cex, truncated_heads=truncated)
        if result.answer is Answer.UNKNOWN:
            unknown = True
    if unknown:
        return BmcOutcome("unknown", truncated_heads=truncated)
    return BmcOutcome("safe", truncated_heads=truncated, exhausted=not truncated)


def _aux_at(aux: AuxInvariants, head: int, store) -> list[A.BExp]:
    return [A.apply_store(inv, store) for inv in aux.get(head, [])]


def _prove_obligations(
    obligations: list[Visit], symtab, checker: ValidityChecker, tick=None
) -> bool:
    for visit in obligations:
        if tick is not None:
            tick()
        query = A.Implies(visit.state.condition(), visit.condition)
        if not checker.valid(query, symtab).is_valid:
            return False
    return True


def induction_step(
    cfa: Cfa,
    prop: SafetyProperty,
    k: int,
    aux: AuxInvariants,
    checker: ValidityChecker | None = None,
    heads: frozenset[int] | None = None,
    path_budget: int = 20_000,
    tick=None,
) -> str:
    """Induction step at bound k: "proven" or "not_inductive".

    For each head: from an arbitrary state satisfying the accepted auxiliary
    invariants, run k violation-free iterations (property visits assumed,
    auxiliary invariants re-assumed at each arrival), then require the
    property on every exit continuation and throughout one further
    iteration.  An unknown validity answer counts as not inductive.
    """
    checker = checker or ValidityChecker()
    targets = sorted(heads if heads is not None else cfa.loop_heads)
    for head in targets:
        fresh = FreshVars(cfa.symtab)
        start = SymState(store=identity_store(cfa.symtab))
        seeded = start
        for cond in _aux_at(aux, head, start.store):
            from .symexec import assume_into

            guarded = assume_into(seeded, cond)
            if guarded is None:
                return "not_inductive"  # contradictory aux cannot happen for validated sets
            seeded = guarded
        states = [seeded]
        obligations: list[Visit] = []
        try:
            for _ in range(k):
                states = body_rounds(
                    cfa, head, states, prop, fresh, aux, True, None, path_budget
                )
                states = _assume_aux_at_arrivals(states, aux, head)
                if not states:
                    break
            if states:
                exit_walk(cfa, head, states, prop, fresh, aux, obligations, path_budget)
                body_rounds(cfa, head, states, prop, fresh, aux, False, obligations, path_budget)
        except PathBudgetExceeded:
            return "not_inductive"
        if not _prove_obligations(obligations, fresh.extended_symtab(), checker, tick):
            return "not_inductive"
    return "proven"


def _assume_aux_at_arrivals(states: list[SymState], aux: AuxInvariants, head: int) -> list[SymState]:
    from .symexec import assume_into

    out = []
    for state in states:
        cur: SymState | None = state
        for cond in _aux_at(aux, head, state.store):
            cur = assume_into(cur, cond)
            if cur is None:
                break
        if cur is not None:
            out.append(cur)
    return out


def validate_invariant(
    cfa: Cfa,
    li: LocatedInvariant,
    accepted: AuxInvariants | None = None,
    checker: ValidityChecker | None = None,
    path_budget: int = 20_000,
    tick=None,
) -> bool:
    """Candidate is accepted iff it holds on loop entry and is preserved by
    one iteration, relative to previously accepted invariants.  Unknown
    validity answers reject (conservative)."""
    checker = checker or ValidityChecker()
    accepted = accepted or {}
    head = li.loop_head
    if head not in cfa.loop_heads:
        return False
    fresh = FreshVars(cfa.symtab)
    obligations: list[Visit] = []
    # entry: every first arrival at the head satisfies the candidate
    entry_state = SymState(store=zero_store(cfa.symtab))
    if cfa.initial == head:
        obligations.append(Visit(entry_state, A.apply_store(li.invariant, entry_state.store)))
    else:
        try:
            ends = walk_segment(
                cfa,
                [(cfa.initial, entry_state)],
                head,
                prop=SafetyProperty(-1, A.TRUE),
                fresh=fresh,
                aux=accepted,
                assume_property=False,
                collect=None,
                max_nodes=path_budget,
            )
        except PathBudgetExceeded:
            return False
        for end in ends:
            if end.reached_target:
                obligations.append(Visit(end.state, A.apply_store(li.invariant, end.state.store)))
    # preservation: one iteration keeps it, assuming it and the accepted set
    from .symexec import assume_into

    pres_state: SymState | None = SymState(store=identity_store(cfa.symtab))
    for cond in [A.apply_store(li.invariant, pres_state.store)] + _aux_at(accepted, head, pres_state.store):
        pres_state = assume_into(pres_state, cond)
        if pres_state is None:
            break
    if pres_state is not None:
        try:
            arrivals = body_rounds(
                cfa,
                head,
                [pres_state],
                SafetyProperty(-1, A.TRUE),
                fresh,
                accepted,
                False,
                None,
                path_budget,
            )
        except PathBudgetExceeded:
            return False
        for arrival in arrivals:
            obligations.append(Visit(arrival, A.apply_store(li.invariant, arrival.store)))
    return _prove_obligations(obligations, fresh.extended_symtab(), checker, tick)


class KInductionMaster(MasterBase):
    name = "kind"

    def __init__(self, cfa: Cfa, prop: SafetyProperty, options: KInductionOptions | None = None):
        super().__init__(cfa, prop, options or KInductionOptions())
        self.state = KInductionState()

    # -- auxiliary invariant pool ----------------------------------------------

    def _accept(self, candidates: list[LocatedInvariant]) -> int:
        """Validate candidates in arrival order (one retry pass for mutual
        support); accepted ones join the auxiliary pool."""
        pending = [
            li
            for li in split_candidates(candidates)
            if not self._already_accepted(li)
        ]
        accepted_count = 0
        for _ in range(2):
            still: list[LocatedInvariant] = []
            for li in pending:
                self.tick()
                if validate_invariant(
                    self.cfa, li, self.state.aux_invariants, self.checker,
                    self.options.path_budget, self.tick,
                ):
                    self.state.aux_invariants.setdefault(li.loop_head, []).append(li.invariant)
                    accepted_count += 1
                    logger.info("%s: accepted invariant %s", self.name, li)
                else:
                    still.append(li)
            if not still:
                break
            pending = still
        for li in pending:
            logger.info("%s: rejected invariant %s", self.name, li)
        return accepted_count

    def _already_accepted(self, li: LocatedInvariant) -> bool:
        texts = {A.to_source(e) for e in self.state.aux_invariants.get(li.loop_head, [])}
        return A.to_source(li.invariant) in texts

    def _drain_and_accept(self) -> int:
        witnesses = self.drain_inbox()
        if not witnesses:
            return 0
        located = self.locate_invariants(witnesses)
        return self._accept(located)

    def _overall_witness(self) -> Witness:
        located = [
            LocatedInvariant(head, A.conjoin(invs), PRODUCER)
            for head, invs in sorted(self.state.aux_invariants.items())
            if invs
        ]
        return witness_from_invariants(self.cfa, located, PRODUCER)

    # -- main loop ---------------------------------------------------------------

    def run(self, timer: float | None = None, deadline: float | None = None) -> VerifierVerdict:
        self.prepare_run(timer, deadline)
        self.state = KInductionState()
        options: KInductionOptions = self.options  # type: ignore[assignment]
        try:
            if options.use_interval_aux:
                from ..helpers.intervals import interval_analysis

                self._accept(interval_analysis(self.cfa).invariants)
            self._drain_and_accept()
            k = 1
            bmc_stuck = False
            while True:
                self.tick()
                self.state.current_k = k
                if not bmc_stuck:
                    outcome = bmc_check(self.cfa, self.prop, k, self.checker, self.tick)
                    if outcome.status == "cex":
                        logger.info("%s: k=%d status=counterexample", self.name, k)
                        return VerifierVerdict(
                            VerdictStatus.FALSE,
                            counterexample=outcome.counterexample,
                            reason=f"violation within {k} loop iterations",
                            stats=self._stats(k),
                        )
                    if outcome.status == "unknown":
                        logger.info("%s: k=%d status=bmc-unknown", self.name, k)
                        bmc_stuck = True
                    else:
                        self.state.proven_bound = k
                        if outcome.exhausted:
                            logger.info("%s: k=%d status=exhausted", self.name, k)
                            return VerifierVerdict(
                                VerdictStatus.TRUE,
                                witness=self._overall_witness(),
                                reason=f"all paths covered within {k} loop iterations",
                                stats=self._stats(k),
                            )
                truncated = outcome.truncated_heads if not bmc_stuck else frozenset(self.cfa.loop_heads)
                # poll for new witnesses before each induction step
                self._drain_and_accept()
                if self.state.proven_bound >= 1:
                    bound = self.state.proven_bound
                    verdict = induction_step(
                        self.cfa, self.prop, bound, self.state.aux_invariants,
                        self.checker, truncated, self.options.path_budget, self.tick,
                    )
                    logger.info("%s: k=%d status=%s", self.name, bound, verdict)
                    if verdict == "proven":
                        return VerifierVerdict(
                            VerdictStatus.TRUE,
                            witness=self._overall_witness(),
                            reason=f"{bound}-induction with {self._aux_count()} auxiliary invariants",
                            stats=self._stats(bound),
                        )
                if k < options.k_max and not bmc_stuck:
                    k += 1
                    continue
                # bound exhausted: only new injections can still help
                witnesses = self.wait_for_injection()
                if not witnesses:
                    return VerifierVerdict(
                        VerdictStatus.UNKNOWN,
                        reason=f"not inductive up to k={self.state.proven_bound}",
                        stats=self._stats(k),
                    )
                located = self.locate_invariants(witnesses)
                if self._accept(located) == 0:
                    logger.info("%s: injected witnesses added no invariant", self.name)
        except AnalysisInterrupted as interrupt:
            return interrupt.verdict

    def _aux_count(self) -> int:
        return sum(len(v) for v in self.state.aux_invariants.values())

    def _stats(self, k: int) -> dict:
        return {
            "k": k,
            "proven_bound": self.state.proven_bound,
            "aux_invariants": self._aux_count(),
            "validity_queries": self.checker.stats["queries"],
        }
