"""Validity checking for fixed-width boolean expressions.

``valid`` decides whether an expression holds for every assignment of its
free variables, in three stages:

1. deterministic sampling (corner values plus seeded random draws) that can
   only produce counter-models, never "valid" verdicts;
2. exhaustive vectorized enumeration when the assignment space fits the
   enumeration budget;
3. bit-blasting to CNF and a bounded CDCL search otherwise.

Assignments under which evaluation faults (division by zero) neither satisfy
nor falsify an expression; counter-models are always genuine, non-faulting
falsifying states, re-checked with the scalar evaluator before being
returned.  When both exhaustive tiers are out of budget the answer is
``unknown`` -- never a wrong verdict.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from hashlib import sha256

import numpy as np

from . import ast as A
from .bitblast import find_falsifying_model
from .evaluate import eval_bexp_grid, eval_expr
from .machine import EvalFault, SymbolTable

DEFAULT_ENUM_BUDGET = 1 << 24
DEFAULT_SAT_CONFLICT_BUDGET = 400_000
_SAMPLE_COUNT = 192
_GRID_CHUNK_BITS = 18


class Answer(Enum):
    VALID = "valid"
    COUNTER = "counter"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ValidityResult:
    answer: Answer
    model: dict[str, int] | None = None
    reason: str = ""

    @property
    def is_valid(self) -> bool:
        return self.answer is Answer.VALID

    @property
    def is_counter(self) -> bool:
        return self.answer is Answer.COUNTER

    @property
    def is_unknown(self) -> bool:
        return self.answer is Answer.UNKNOWN


VALID = ValidityResult(Answer.VALID)


@dataclass
class ValidityChecker:
    """Budgeted validity checker with a per-instance memo cache."""

    enum_budget: int = DEFAULT_ENUM_BUDGET
    sat_conflict_budget: int = DEFAULT_SAT_CONFLICT_BUDGET
    use_sat: bool = True
    _cache: dict[tuple, ValidityResult] = field(default_factory=dict)
    stats: dict[str, int] = field(default_factory=lambda: {"queries": 0, "cache_hits": 0, "sat_calls": 0})

    def valid(self, expr: A.BExp, symtab: SymbolTable) -> ValidityResult:
        self.stats["queries"] += 1
        names = sorted(A.free_vars(expr))
        for name in names:
            if not symtab.declares(name):
                raise KeyError(f"undeclared variable {name!r} in validity query")
        key = (
            A.to_source(expr),
            symtab.width,
            tuple((n, symtab.is_signed(n)) for n in names),
        )
        cached = self._cache.get(key)
        if cached is not None:
            self.stats["cache_hits"] += 1
            return cached
        result = self._decide(expr, symtab, names)
        self._cache[key] = result
        return result

    # -- internals -----------------------------------------------------------

    def _counter(self, expr: A.BExp, symtab: SymbolTable, env: dict[str, int]) -> ValidityResult:
        # A counter-model is total over the declared variables.
        full = {name: 0 for name in symtab.variables}
        full.update(env)
        try:
            value = eval_expr(expr, full, symtab)
        except EvalFault:  # pragma: no cover - tiers never hand over faulting models
            raise AssertionError("internal error: faulting counter-model")
        assert value is False, "internal error: counter-model does not falsify"
        return ValidityResult(Answer.COUNTER, full)

    def _decide(self, expr: A.BExp, symtab: SymbolTable, names: list[str]) -> ValidityResult:
        folded = A.fold(expr)
        if isinstance(folded, A.BoolLit):
            if folded.value:
                return VALID
            return self._counter(expr, symtab, {})
        if not names:
            try:
                value = eval_expr(expr, {}, symtab)
            except EvalFault:
                return VALID  # no non-faulting assignment falsifies it
            return VALID if value else self._counter(expr, symtab, {})

        sampled = self._sample(expr, symtab, names)
        if sampled is not None:
            return sampled

        space = 1
        for _ in names:
            space <<= symtab.width
            if space > max(self.enum_budget, 1):
                break
        if space <= self.enum_budget:
            return self._enumerate(expr, symtab, names)
        if self.use_sat:
            self.stats["sat_calls"] += 1
            status, model = find_falsifying_model(expr, symtab, self.sat_conflict_budget)
            if status == "unsat":
                return VALID
            if status == "sat":
                assert model is not None
                return self._counter(expr, symtab, {n: model.get(n, 0) for n in names})
            return ValidityResult(Answer.UNKNOWN, reason="SAT conflict budget exhausted")
        return ValidityResult(Answer.UNKNOWN, reason="enumeration budget exceeded")

    def _sample(self, expr: A.BExp, symtab: SymbolTable, names: list[str]) -> ValidityResult | None:
        corners = [0, 1, symtab.mask, 1 << (symtab.width - 1)]
        candidates: list[dict[str, int]] = []
        if len(names) <= 3:
            for combo in itertools.product(corners, repeat=len(names)):
                candidates.append(dict(zip(names, combo)))
        seed = int.from_bytes(sha256(A.to_source(expr).encode()).digest()[:8], "big")
        rng = random.Random(seed)
        for _ in range(_SAMPLE_COUNT):
            candidates.append({n: rng.randrange(0, symtab.mask + 1) for n in names})
        for env in candidates:
            try:
                if eval_expr(expr, env, symtab) is False:
                    return self._counter(expr, symtab, env)
            except EvalFault:
                continue
        return None

    def _enumerate(self, expr: A.BExp, symtab: SymbolTable, names: list[str]) -> ValidityResult:
        width = symtab.width
        values_per_var = 1 << width
        # Split into an inner broadcast grid and an outer python loop so the
        # intermediate arrays stay small.
        inner_count = max(1, min(len(names), _GRID_CHUNK_BITS // width))
        inner = names[:inner_count]
        outer = names[inner_count:]
        axis_values = np.arange(values_per_var, dtype=np.uint64)
        inner_arrays: dict[str, np.ndarray] = {}
        for i, name in enumerate(inner):
            shape = [1] * len(inner)
            shape[i] = values_per_var
            inner_arrays[name] = axis_values.reshape(shape)
        for combo in itertools.product(range(values_per_var), repeat=len(outer)):
            env: dict[str, np.ndarray] = dict(inner_arrays)
            for name, value in zip(outer, combo):
                env[name] = np.uint64(value)
            values, fault = eval_bexp_grid(expr, env, symtab)
            falsified = ~values
            if fault is not None:
                falsified &= ~fault
            if falsified.any():
                flat_index = int(np.argmax(falsified))
                coords = np.unravel_index(flat_index, falsified.shape)
                model = {name: int(value) for name, value in zip(outer, combo)}
                for axis, name in enumerate(inner):
                    model[name] = int(coords[axis])
                return self._counter(expr, symtab, model)
        return VALID


_DEFAULT_CHECKER = ValidityChecker()


def valid(
    expr: A.BExp,
    symtab: SymbolTable,
    checker: ValidityChecker | None = None,
) -> ValidityResult:
    """Module-level entry point using a shared default checker."""
    return (checker or _DEFAULT_CHECKER).valid(expr, symtab)


def equivalent(a: A.BExp, b: A.BExp, symtab: SymbolTable, checker: ValidityChecker | None = None) -> bool:
    """True when the two expressions agree on every non-faulting assignment."""
    both = A.And(A.Implies(a, b), A.Implies(b, a))
    return valid(both, symtab, checker).is_valid


def clear_default_cache() -> None:
    _DEFAULT_CHECKER._cache.clear()
