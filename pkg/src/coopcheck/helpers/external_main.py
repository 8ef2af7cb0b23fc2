"""Standalone executables wrapping the built-in helpers.

Each entry point speaks the external helper protocol: it reads the task
program, runs its analysis, writes a GraphML witness to the output path and
exits 0.  A ``sleep`` variant that never produces output is included for
exercising timeout enforcement.
"""

from __future__ import annotations

import argparse
import sys
import time

from ..lang.frontend import Program, extract_properties, parse
from ..witness.graphml import write_graphml
from .affine import affine_equality_analysis
from .base import HelperStatus
from .intervals import interval_analysis
from .templates import template_guess_check


def _argparser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser()
    parser.add_argument("--task", required=True)
    parser.add_argument("--property", required=True, dest="property_encoding")
    parser.add_argument("--output", required=True)
    parser.add_argument("--timeout", type=float, required=True)
    parser.add_argument("--width", type=int, default=8)
    return parser


def run(analysis: str, argv: list[str] | None = None) -> int:
    args = _argparser().parse_args(argv)
    if analysis == "sleep":
        time.sleep(args.timeout + 3600)
        return 1
    program = Program.from_file(args.task)
    cfa = parse(program, width=args.width)
    props = extract_properties(cfa)
    if analysis == "interval":
        result = interval_analysis(cfa)
    elif analysis == "affine":
        result = affine_equality_analysis(cfa)
    elif analysis == "template":
        result = template_guess_check(cfa, props[0])
    else:
        print(f"unknown analysis {analysis!r}", file=sys.stderr)
        return 2
    if result.status is not HelperStatus.COMPLETED or result.witness is None:
        print(f"analysis did not complete: {result.status.value}", file=sys.stderr)
        return 1
    with open(args.output, "w", encoding="utf-8") as handle:
        handle.write(write_graphml(result.witness))
    return 0


def main_interval() -> None:
    sys.exit(run("interval"))


def main_affine() -> None:
    sys.exit(run("affine"))


def main_template() -> None:
    sys.exit(run("template"))


if __name__ == "__main__":
    sys.exit(run(sys.argv[1], sys.argv[2:]))
