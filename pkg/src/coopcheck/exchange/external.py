"""Black-box helper subprocess protocol.

External helpers are executables invoked as::

    <exe> --task <program file> --property <encoding name> \
          --output <witness path> --timeout <seconds>

They read the task, write either a GraphML witness or a raw invariant file
(see :mod:`coopcheck.exchange.adapter`) to the output path and exit 0 on
success.  The runner applies the mapper when the helper expects a different
property encoding, gives each invocation a fresh working directory, captures
stdout/stderr, and enforces the timeout with a process-group kill.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ..helpers.base import HelperResult, HelperStatus
from ..lang.cfa import Cfa, SafetyProperty
from ..lang.frontend import Program, parse
from ..witness.graphml import read_graphml
from ..witness.matching import match_to_cfa
from ..witness.model import Witness, WitnessFormatError
from .adapter import NamespaceMapError, adapt, parse_raw_output
from .mapper import MappingError, PropertyEncoding, detect_encoding, map_property

_KILL_GRACE = 0.5
_POLL_INTERVAL = 0.05


class ExternalHelperError(Exception):
    pass


@dataclass(frozen=True)
class ExternalHelperSpec:
    """Registration record for one external helper executable."""

    name: str
    command: tuple[str, ...]  # executable plus fixed leading arguments
    encoding: PropertyEncoding = PropertyEncoding.ERROR_LABEL
    output_kind: str = "witness"  # "witness" | "raw_invariants"
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if not self.command:
            raise ExternalHelperError("empty helper command")
        exe = self.command[0]
        resolved = shutil.which(exe) or (exe if os.path.isfile(exe) and os.access(exe, os.X_OK) else None)
        if resolved is None:
            raise ExternalHelperError(f"helper executable {exe!r} not found or not runnable")
        if self.output_kind not in ("witness", "raw_invariants"):
            raise ExternalHelperError(f"unknown output kind {self.output_kind!r}")
        if self.timeout <= 0:
            raise ExternalHelperError("helper timeout must be positive")


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.wait(timeout=_KILL_GRACE)
    except subprocess.TimeoutExpired:  # pragma: no cover
        pass


def run_external_helper(
    spec: ExternalHelperSpec,
    program: Program,
    prop: SafetyProperty,
    cfa: Cfa | None = None,
    stop_event: threading.Event | None = None,
    timeout: float | None = None,
) -> HelperResult:
    """Run one external helper to completion, timeout, or stop."""
    started = time.monotonic()
    deadline = started + (timeout if timeout is not None else spec.timeout)
    if cfa is None:
        cfa = parse(program)
    diagnostics: list[str] = []

    task_program = program
    try:
        if detect_encoding(program).style is not spec.encoding:
            task_program = map_property(program, spec.encoding)
            diagnostics.append(f"property re-encoded as {spec.encoding.value}")
    except MappingError as exc:
        return HelperResult(
            HelperStatus.FAILED,
            elapsed=time.monotonic() - started,
            diagnostics=[f"mapper failed: {exc}"],
        )

    with tempfile.TemporaryDirectory(prefix=f"helper-{spec.name}-") as workdir:
        task_path = Path(workdir) / (Path(program.path).name or "task.mc")
        task_path.write_text(task_program.text, encoding="utf-8")
        out_path = Path(workdir) / "result.out"
        argv = list(spec.command) + [
            "--task",
            str(task_path),
            "--property",
            spec.encoding.value,
            "--output",
            str(out_path),
            "--timeout",
            str(max(1, int(deadline - time.monotonic()))),
        ]
        proc = subprocess.Popen(
            argv,
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,  # own process group for a clean kill
        )
        while True:
            if proc.poll() is not None:
                break
            now = time.monotonic()
            if stop_event is not None and stop_event.is_set():
                _kill_group(proc)
                return HelperResult(
                    HelperStatus.STOPPED, elapsed=time.monotonic() - started, diagnostics=diagnostics
                )
            if now >= deadline:
                _kill_group(proc)
                return HelperResult(
                    HelperStatus.TIMED_OUT, elapsed=time.monotonic() - started, diagnostics=diagnostics
                )
            time.sleep(min(_POLL_INTERVAL, max(deadline - now, 0.001)))
        stdout, stderr = proc.communicate()
        elapsed = time.monotonic() - started
        if proc.returncode != 0:
            diagnostics.append(f"exit code {proc.returncode}")
            diagnostics.append(f"stdout: {stdout.decode(errors='replace')[-2000:]}")
            diagnostics.append(f"stderr: {stderr.decode(errors='replace')[-2000:]}")
            return HelperResult(HelperStatus.FAILED, elapsed=elapsed, diagnostics=diagnostics)
        if not out_path.exists():
            diagnostics.append("helper exited 0 but wrote no output file")
            return HelperResult(HelperStatus.FAILED, elapsed=elapsed, diagnostics=diagnostics)
        payload = out_path.read_text(encoding="utf-8")

    if spec.output_kind == "witness":
        try:
            witness = read_graphml(payload)
        except WitnessFormatError as exc:
            diagnostics.append(f"malformed witness: {exc}")
            diagnostics.append(f"output (truncated): {payload[:2000]}")
            return HelperResult(HelperStatus.FAILED, elapsed=elapsed, diagnostics=diagnostics)
        recorded = witness.program_hash
        allowed = {cfa.source_hash, _hash_of(task_program)}
        if recorded is not None and recorded not in allowed:
            diagnostics.append("witness program hash matches neither original nor mapped program")
            return HelperResult(HelperStatus.FAILED, elapsed=elapsed, diagnostics=diagnostics)
        match = match_to_cfa(witness, cfa, force=True)
        diagnostics.extend(match.diagnostics)
        return HelperResult(
            HelperStatus.COMPLETED,
            invariants=match.invariants,
            witness=witness,
            elapsed=elapsed,
            diagnostics=diagnostics,
        )
    try:
        raw, nsmap = parse_raw_output(payload)
        result = adapt(raw, nsmap, cfa)
    except (NamespaceMapError, ValueError) as exc:
        diagnostics.append(f"malformed raw invariant output: {exc}")
        diagnostics.append(f"output (truncated): {payload[:2000]}")
        return HelperResult(HelperStatus.FAILED, elapsed=elapsed, diagnostics=diagnostics)
    diagnostics.extend(result.diagnostics)
    return HelperResult(
        HelperStatus.COMPLETED,
        invariants=result.invariants,
        witness=result.witness,
        elapsed=elapsed,
        diagnostics=diagnostics,
    )


def _hash_of(program: Program) -> str:
    import hashlib

    return "sha256:" + hashlib.sha256(program.text.encode()).hexdigest()
