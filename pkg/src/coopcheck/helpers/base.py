"""Shared helper-generator types."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum

from ..witness.model import LocatedInvariant, Witness


class HelperStatus(Enum):
    COMPLETED = "completed"
    TIMED_OUT = "timed_out"
    FAILED = "failed"
    STOPPED = "stopped"


@dataclass
class HelperResult:
    """Outcome of one invariant-generator run.

    A completed run always carries at least the trivial result: the invariant
    list may be empty, the witness is then trivial.
    """

    status: HelperStatus
    invariants: list[LocatedInvariant] = field(default_factory=list)
    witness: Witness | None = None
    elapsed: float = 0.0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status is HelperStatus.COMPLETED


def stopped(stop_event: threading.Event | None) -> bool:
    return stop_event is not None and stop_event.is_set()
