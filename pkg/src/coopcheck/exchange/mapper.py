"""Property-encoding rewrites (the "mapper").

Different helper tools expect the safety property in different syntactic
dialects.  The mapper rewrites only the lines of the property encoding and
pads with blank lines so the total line count is unchanged: every other
line stays byte-identical and witness line references remain aligned.
Mapping a program to its current style returns it unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..lang.frontend import ParseError, Program, PropertySite, parse_ast
from ..logic import ast as A


class PropertyEncoding(Enum):
    ERROR_LABEL = "error_label"
    VERIFIER_ERROR_CALL = "verifier_error_call"
    ASSERT_STMT = "assert_stmt"

    @classmethod
    def from_name(cls, name: str) -> "PropertyEncoding":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown property encoding {name!r}")


class MappingError(Exception):
    pass


@dataclass(frozen=True)
class EncodingInfo:
    style: PropertyEncoding
    condition: A.BExp | None
    start_line: int
    end_line: int
    indent: str


def detect_encoding(program: Program) -> EncodingInfo:
    """Locate the property encoding in the source.

    Exactly one rewritable site is required; programs with several property
    encodings are verified per property but not remapped.
    """
    try:
        ast = parse_ast(program)
    except ParseError as exc:
        raise MappingError(f"cannot parse program: {exc}") from None
    sites = ast.property_sites
    if not sites:
        raise MappingError("no property encoding found in the program")
    if len(sites) > 1:
        raise MappingError(f"{len(sites)} property encodings found; mapping needs exactly one")
    site = sites[0]
    return EncodingInfo(
        PropertyEncoding.from_name(site.style),
        site.condition,
        site.start_line,
        site.end_line,
        site.indent,
    )


def _render(style: PropertyEncoding, condition: A.BExp | None, indent: str) -> str:
    cond_text = A.to_source(condition) if condition is not None else None
    if style is PropertyEncoding.ASSERT_STMT:
        return f"{indent}assert({cond_text if cond_text is not None else 'false'});"
    body = "Error: return 1;" if style is PropertyEncoding.ERROR_LABEL else "verifier_error();"
    if cond_text is None:
        return f"{indent}{body}"  # unconditional reach, guard stays implicit
    return f"{indent}if (!({cond_text})) {{ {body} }}"


def map_property(program: Program, target: PropertyEncoding) -> Program:
    """Rewrite the property encoding into ``target`` style.

    Byte-preserving outside the encoding's line range; the identity when the
    program already uses the target style.
    """
    info = detect_encoding(program)
    if info.style is target:
        return program
    replacement = _render(target, info.condition, info.indent)
    keepends = program.text.splitlines(keepends=True)
    out: list[str] = []
    for i, line in enumerate(keepends, start=1):
        if i < info.start_line or i > info.end_line:
            out.append(line)
        elif i == info.start_line:
            newline = "\n" if line.endswith("\n") else ""
            out.append(replacement + newline)
        else:
            out.append("\n" if line.endswith("\n") else "")
    return Program("".join(out), program.path)
