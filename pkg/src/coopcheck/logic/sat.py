"""A small CDCL SAT solver.

Single-shot solving over integer literals (+v / -v, variables numbered from
1).  Implements two-watched-literal propagation, first-UIP clause learning,
activity-based decisions with phase saving and geometric restarts.  Solving
is bounded by a conflict budget so callers never block indefinitely; hitting
the budget yields ``None`` ("unknown") rather than a wrong answer.
"""

from __future__ import annotations


class SatSolver:
    def __init__(self) -> None:
        self.nvars = 0
        self.values: list[bool | None] = [None]  # index 0 unused
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.watches: dict[int, list[list[int]]] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.ok = True
        self.conflicts = 0

    # -- construction ------------------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        self.values.append(None)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(False)
        self.watches[self.nvars] = []
        self.watches[-self.nvars] = []
        return self.nvars

    def add_clause(self, lits: list[int]) -> None:
        if not self.ok:
            return
        seen: set[int] = set()
        clause: list[int] = []
        for lit in lits:
            if -lit in seen:
                return  # tautology
            if lit in seen:
                continue
            val = self._value(lit)
            if val is True:
                return
            if val is False and self.level[abs(lit)] == 0:
                continue
            seen.add(lit)
            clause.append(lit)
        if not clause:
            self.ok = False
            return
        if len(clause) == 1:
            if not self._enqueue(clause[0], None):
                self.ok = False
            return
        self._attach(clause)

    def _attach(self, clause: list[int]) -> None:
        self.watches[-clause[0]].append(clause)
        self.watches[-clause[1]].append(clause)

    # -- assignment --------------------------------------------------------

    def _value(self, lit: int) -> bool | None:
        v = self.values[abs(lit)]
        if v is None:
            return None
        return v if lit > 0 else not v

    def _enqueue(self, lit: int, reason: list[int] | None) -> bool:
        val = self._value(lit)
        if val is not None:
            return val
        var = abs(lit)
        self.values[var] = lit > 0
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)
        return True

    def _propagate(self) -> list[int] | None:
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            neg = -lit
            watchlist = self.watches[neg]
            i = 0
            kept: list[list[int]] = []
            while i < len(watchlist):
                clause = watchlist[i]
                i += 1
                if clause[0] == neg:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                if self._value(first) is True:
                    kept.append(clause)
                    continue
                for k in range(2, len(clause)):
                    if self._value(clause[k]) is not False:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches[-clause[1]].append(clause)
                        break
                else:
                    kept.append(clause)
                    if not self._enqueue(first, clause):
                        kept.extend(watchlist[i:])
                        self.watches[neg] = kept
                        return clause
            self.watches[neg] = kept
        return None

    # -- conflict analysis -------------------------------------------------

    def _bump(self, var: int) -> None:
        self.activity[var] += self.var_inc
        if self.activity[var] > 1e100:
            for v in range(1, self.nvars + 1):
                self.activity[v] *= 1e-100
            self.var_inc *= 1e-100

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        learnt: list[int] = [0]
        seen = [False] * (self.nvars + 1)
        counter = 0
        p: int | None = None
        index = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        clause: list[int] | None = conflict
        while True:
            assert clause is not None
            for q in clause:
                if p is not None and q == p:
                    continue
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] == cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[index])]:
                index -= 1
            p = -self.trail[index]
            seen[abs(p)] = False
            index -= 1
            counter -= 1
            if counter == 0:
                break
            clause = self.reason[abs(p)]
        learnt[0] = p
        if len(learnt) == 1:
            return learnt, 0
        bt = max(self.level[abs(q)] for q in learnt[1:])
        # the highest-level non-asserting literal must be watched second
        for k in range(1, len(learnt)):
            if self.level[abs(learnt[k])] == bt:
                learnt[1], learnt[k] = learnt[k], learnt[1]
                break
        return learnt, bt

    def _backtrack(self, target_level: int) -> None:
        while len(self.trail_lim) > target_level:
            limit = self.trail_lim.pop()
            while len(self.trail) > limit:
                lit = self.trail.pop()
                var = abs(lit)
                self.phase[var] = self.values[var]  # type: ignore[assignment]
                self.values[var] = None
                self.reason[var] = None
        self.qhead = min(self.qhead, len(self.trail))

    def _decide(self) -> int | None:
        best = None
        best_act = -1.0
        for v in range(1, self.nvars + 1):
            if self.values[v] is None and self.activity[v] > best_act:
                best = v
                best_act = self.activity[v]
        if best is None:
            return None
        return best if self.phase[best] else -best

    # -- main loop ---------------------------------------------------------

    def solve(self, conflict_budget: int = 200_000) -> bool | None:
        """Return True (sat), False (unsat) or None (budget exhausted)."""
        if not self.ok:
            return False
        if self._propagate() is not None:
            return False
        restart_interval = 128.0
        conflicts_until_restart = restart_interval
        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                conflicts_until_restart -= 1
                if len(self.trail_lim) == 0:
                    return False
                if self.conflicts > conflict_budget:
                    return None
                learnt, bt = self._analyze(conflict)
                self._backtrack(bt)
                if len(learnt) == 1:
                    if not self._enqueue(learnt[0], None):
                        return False
                else:
                    self._attach(learnt)
                    self._enqueue(learnt[0], learnt)
                self.var_inc *= 1.053
            else:
                if conflicts_until_restart <= 0:
                    conflicts_until_restart = restart_interval = restart_interval * 1.5
                    self._backtrack(0)
                lit = self._decide()
                if lit is None:
                    return True
                self.trail_lim.append(len(self.trail))
                self._enqueue(lit, None)

    def model(self) -> dict[int, bool]:
        return {v: bool(self.values[v]) for v in range(1, self.nvars + 1) if self.values[v] is not None}
