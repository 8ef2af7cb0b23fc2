"""Built-in helper invariant generators.

Each helper takes a CFA (plus the property where relevant) and returns a
:class:`HelperResult` whose invariants are also packaged as a correctness
witness.  The same analyses double as standalone executables speaking the
external helper protocol (see :mod:`coopcheck.helpers.external_main`).
"""

from __future__ import annotations

import threading
from typing import Callable, Protocol

from ..lang.cfa import Cfa, SafetyProperty
from .affine import affine_equality_analysis
from .base import HelperResult, HelperStatus
from .intervals import interval_analysis
from .templates import template_guess_check


class HelperFn(Protocol):
    def __call__(
        self, cfa: Cfa, prop: SafetyProperty, stop_event: threading.Event | None = None
    ) -> HelperResult: ...


def _interval(cfa: Cfa, prop: SafetyProperty, stop_event: threading.Event | None = None) -> HelperResult:
    return interval_analysis(cfa, stop_event)


def _affine(cfa: Cfa, prop: SafetyProperty, stop_event: threading.Event | None = None) -> HelperResult:
    return affine_equality_analysis(cfa, stop_event)


def _template(cfa: Cfa, prop: SafetyProperty, stop_event: threading.Event | None = None) -> HelperResult:
    return template_guess_check(cfa, prop, stop_event=stop_event)


BUILTIN_HELPERS: dict[str, HelperFn] = {
    "interval": _interval,
    "affine": _affine,
    "template": _template,
}

__all__ = [
    "BUILTIN_HELPERS",
    "HelperFn",
    "HelperResult",
    "HelperStatus",
    "affine_equality_analysis",
    "interval_analysis",
    "template_guess_check",
]
