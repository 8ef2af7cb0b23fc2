"""Verifier verdicts shared by masters, orchestrator and CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

from .semantics import Counterexample, VerdictStatus
from .witness.model import Witness


@dataclass
class VerifierVerdict:
    status: VerdictStatus
    counterexample: Counterexample | None = None
    witness: Witness | None = None
    reason: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def is_true(self) -> bool:
        return self.status is VerdictStatus.TRUE

    @property
    def is_false(self) -> bool:
        return self.status is VerdictStatus.FALSE

    @property
    def conclusive(self) -> bool:
        return self.status in (VerdictStatus.TRUE, VerdictStatus.FALSE)

    def __str__(self) -> str:
        return self.status.value
