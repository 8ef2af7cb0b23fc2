"""Invariant adapter: foreign-namespace invariants to correctness witnesses.

Helpers that analyze an intermediate representation report invariants over
their own variable names and location keys.  The adapter (1) renames the
variables into the program namespace, resolving intermediate variables that
map to whole expressions, (2) maps location keys to source lines and snaps
each line to the innermost enclosing loop head, and (3) constructs a witness
from the CFA skeleton with the invariants attached to the loop-head states.
Anything that cannot be translated faithfully is dropped with a diagnostic,
never silently misnamed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..lang.cfa import Cfa
from ..logic import ast as A
from ..logic.parser import ExprSyntaxError, parse_arith, parse_expression
from ..witness.matching import witness_from_invariants
from ..witness.model import LocatedInvariant, Witness

ADAPTER_PRODUCER = "coopcheck-adapter"


class NamespaceMapError(Exception):
    pass


@dataclass(frozen=True)
class NamespaceMap:
    """Bijection between helper variable names and program names, plus a map
    from helper location keys to source lines.

    A helper variable may also map to a whole program expression (three
    address style intermediates); those entries are excluded from the
    bijectivity requirement and are resolved transitively.
    """

    pairs: dict[str, str]  # helper var -> program var name or expression text
    location_map: dict[str, int]  # helper location key -> 1-based source line

    def __post_init__(self) -> None:
        plain = [t for t in self.pairs.values() if _is_identifier(t)]
        if len(set(plain)) != len(plain):
            raise NamespaceMapError("variable mapping is not injective on names")

    def resolve(self, name: str) -> A.AExp:
        """Expand a helper variable to a program expression (acyclically)."""
        return self._resolve(name, ())

    def _resolve(self, name: str, seen: tuple[str, ...]) -> A.AExp:
        if name in seen:
            raise NamespaceMapError(f"cyclic mapping through {name!r}")
        target = self.pairs.get(name)
        if target is None:
            raise NamespaceMapError(f"unmapped variable {name!r}")
        try:
            expr = parse_arith(target)
        except ExprSyntaxError as exc:
            raise NamespaceMapError(f"mapping for {name!r} does not parse: {exc}") from None
        out = expr
        for free in sorted(A.free_vars(expr)):
            if free in self.pairs:
                out = A.substitute(out, free, self._resolve(free, seen + (name,)))
        return out


def _is_identifier(text: str) -> bool:
    return text.isidentifier()


@dataclass
class AdaptResult:
    witness: Witness
    invariants: list[LocatedInvariant]
    diagnostics: list[str] = field(default_factory=list)


def snap_to_loop_head(cfa: Cfa, line: int) -> int | None:
    """The innermost loop head whose loop statement spans the line."""
    best: tuple[int, int] | None = None  # (span size, head)
    for head, (start, end) in cfa.loop_spans.items():
        if start <= line <= end:
            size = end - start
            if best is None or size < best[0]:
                best = (size, head)
    return best[1] if best is not None else None


def adapt(
    raw: list[tuple[str, str]],
    nsmap: NamespaceMap,
    cfa: Cfa,
) -> AdaptResult:
    """Translate raw ``(invariant text, location key)`` pairs into a witness."""
    diagnostics: list[str] = []
    program_vars = set(cfa.symtab.variables)
    located: list[LocatedInvariant] = []
    for inv_text, loc_key in raw:
        try:
            expr = parse_expression(inv_text)
        except ExprSyntaxError as exc:
            diagnostics.append(f"dropped {inv_text!r}: does not parse ({exc})")
            continue
        translated: A.BExp = expr
        failed = None
        for name in sorted(A.free_vars(expr)):
            if name in program_vars and name not in nsmap.pairs:
                continue  # already a program variable
            try:
                replacement = nsmap.resolve(name)
            except NamespaceMapError as exc:
                failed = str(exc)
                break
            translated = A.substitute(translated, name, replacement)
        if failed is not None:
            diagnostics.append(f"dropped {inv_text!r}: {failed}")
            continue
        leftover = sorted(A.free_vars(translated) - program_vars)
        if leftover:
            diagnostics.append(f"dropped {inv_text!r}: untranslated variables {leftover}")
            continue
        line = nsmap.location_map.get(loc_key)
        if line is None:
            diagnostics.append(f"dropped {inv_text!r}: unmapped location key {loc_key!r}")
            continue
        head = snap_to_loop_head(cfa, line)
        if head is None:
            diagnostics.append(f"dropped {inv_text!r}: line {line} is not inside any loop")
            continue
        located.append(LocatedInvariant(head, translated, ADAPTER_PRODUCER))
    witness = witness_from_invariants(cfa, located, ADAPTER_PRODUCER)
    return AdaptResult(witness, located, diagnostics)


# --------------------------------------------------------------------------
# Line-oriented raw helper output:
#
#     <location key> \t <invariant expression>
#     ...
#     MAP
#     <helper var> \t <program name or expression>
#     @<location key> \t <line number>
# --------------------------------------------------------------------------


def parse_raw_output(text: str) -> tuple[list[tuple[str, str]], NamespaceMap]:
    raw: list[tuple[str, str]] = []
    pairs: dict[str, str] = {}
    location_map: dict[str, int] = {}
    in_map = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped == "MAP":
            in_map = True
            continue
        if "\t" not in stripped:
            raise NamespaceMapError(f"line {lineno}: expected tab-separated fields")
        left, _, right = stripped.partition("\t")
        left, right = left.strip(), right.strip()
        if in_map:
            if left.startswith("@"):
                location_map[left[1:]] = int(right)
            else:
                pairs[left] = right
        else:
            raw.append((right, left))
    return raw, NamespaceMap(pairs, location_map)


def format_raw_output(
    raw: list[tuple[str, str]], nsmap: NamespaceMap
) -> str:
    lines = [f"{loc_key}\t{inv}" for inv, loc_key in raw]
    lines.append("MAP")
    for name in sorted(nsmap.pairs):
        lines.append(f"{name}\t{nsmap.pairs[name]}")
    for key in sorted(nsmap.location_map):
        lines.append(f"@{key}\t{nsmap.location_map[key]}")
    return "\n".join(lines) + "\n"
