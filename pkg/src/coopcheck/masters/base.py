"""Common machinery for master analyses.

A master runs as a single logical worker.  ``inject`` and ``stop`` are the
only cross-worker entry points: the injection inbox is a thread-safe queue
drained at the analysis' polling points, and stopping is a cancellation flag
honored between solver calls.  The inbox can be closed by the coordinator
once no further witnesses can arrive, which lets a stuck analysis conclude
``unknown`` instead of waiting forever.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass

from ..lang.cfa import Cfa, SafetyProperty
from ..logic import ast as A
from ..logic.validity import ValidityChecker
from ..semantics import VerdictStatus
from ..verdict import VerifierVerdict
from ..witness.matching import match_to_cfa
from ..witness.model import LocatedInvariant, Witness

logger = logging.getLogger("coopcheck.masters")


class AnalysisInterrupted(Exception):
    def __init__(self, verdict: VerifierVerdict):
        super().__init__(verdict.reason)
        self.verdict = verdict


@dataclass
class MasterOptions:
    enum_budget: int = 1 << 24
    sat_conflict_budget: int = 400_000
    path_budget: int = 20_000
    inbox_poll_interval: float = 0.02


class MasterBase:
    name = "master"

    def __init__(self, cfa: Cfa, prop: SafetyProperty, options: MasterOptions | None = None):
        self.cfa = cfa
        self.prop = prop
        self.options = options or MasterOptions()
        self.inbox: "queue.Queue[Witness]" = queue.Queue()
        self.inbox_closed = threading.Event()
        self.stop_event = threading.Event()
        self.help_requested = threading.Event()
        self._timer: float | None = None
        self._deadline: float | None = None
        self._started_at = 0.0
        self.checker = ValidityChecker(
            enum_budget=self.options.enum_budget,
            sat_conflict_budget=self.options.sat_conflict_budget,
        )

    # -- cross-worker entry points ------------------------------------------

    def inject(self, witnesses: list[Witness] | Witness) -> None:
        """Enqueue witnesses; drained at the analysis' polling points."""
        if isinstance(witnesses, Witness):
            witnesses = [witnesses]
        for w in witnesses:
            self.inbox.put(w)

    def stop(self) -> None:
        self.stop_event.set()

    def close_inbox(self) -> None:
        self.inbox_closed.set()

    # -- lifecycle ------------------------------------------------------------

    def prepare_run(self, timer: float | None, deadline: float | None) -> None:
        """Reset per-run flags; a restarted master starts from scratch."""
        self.stop_event.clear()
        self.help_requested.clear()
        self._timer = timer
        self._deadline = deadline
        self._started_at = time.monotonic()

    def run(self, timer: float | None = None, deadline: float | None = None) -> VerifierVerdict:
        raise NotImplementedError

    # -- cooperation helpers ---------------------------------------------------

    def tick(self) -> None:
        """Between solver calls: honor stop, deadline, and the help timer."""
        if self.stop_event.is_set():
            raise AnalysisInterrupted(VerifierVerdict(VerdictStatus.UNKNOWN, reason="stopped"))
        now = time.monotonic()
        if self._deadline is not None and now >= self._deadline:
            raise AnalysisInterrupted(VerifierVerdict(VerdictStatus.TIMEOUT, reason="global timeout"))
        if (
            self._timer is not None
            and not self.help_requested.is_set()
            and now - self._started_at >= self._timer
        ):
            logger.info("%s: help requested after %.2fs", self.name, now - self._started_at)
            self.help_requested.set()

    def drain_inbox(self) -> list[Witness]:
        out: list[Witness] = []
        while True:
            try:
                out.append(self.inbox.get_nowait())
            except queue.Empty:
                return out

    def locate_invariants(self, witnesses: list[Witness]) -> list[LocatedInvariant]:
        """Match injected witnesses against the CFA; unmatched or unparsable
        ones are logged and skipped."""
        located: list[LocatedInvariant] = []
        for w in witnesses:
            try:
                result = match_to_cfa(w, self.cfa, force=True)
            except Exception as exc:  # malformed witness: skip, never abort
                logger.warning("%s: skipping witness (%s)", self.name, exc)
                continue
            for note in result.diagnostics:
                logger.info("%s: witness: %s", self.name, note)
            located.extend(result.invariants)
        return located

    def wait_for_injection(self) -> list[Witness]:
        """Block until new witnesses arrive or the inbox is closed (empty
        list).  Keeps honoring stop/deadline while waiting."""
        while True:
            self.tick()
            witnesses = self.drain_inbox()
            if witnesses:
                return witnesses
            if self.inbox_closed.is_set():
                return []
            time.sleep(self.options.inbox_poll_interval)


def split_candidates(located: list[LocatedInvariant]) -> list[LocatedInvariant]:
    """Break conjunctions into individual candidates (order preserved), so
    one bad conjunct cannot drag down the others."""
    out: list[LocatedInvariant] = []
    seen: set[tuple[int, str]] = set()
    for li in located:
        for part in A.split_conjunctions(li.invariant):
            if A.is_trivial(part):
                continue
            key = (li.loop_head, A.to_source(part))
            if key not in seen:
                seen.add(key)
                out.append(LocatedInvariant(li.loop_head, part, li.source))
    return out
