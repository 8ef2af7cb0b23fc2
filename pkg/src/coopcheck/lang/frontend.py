"""Parser for the mini imperative language and CFA construction.

The language is a small C subset: fixed-width ``int`` / ``unsigned int``
declarations, assignments, ``x++``/``x--``, ``if``/``else``, ``while``,
``nondet()`` for unconstrained input, parameterless calls to empty helper
procedures, ``return``, and three interchangeable safety-property encodings::

    if (!(cond)) { Error: return 1; }     // error label
    if (!(cond)) { verifier_error(); }    // error call
    assert(cond);                         // assert form

Programs use the ``.mc`` extension.  One source file holds exactly one entry
procedure ``int main()`` (plus optional empty ``void`` helpers).  All
variables live in one flat scope; uninitialized variables start at 0, so a
bare declaration contributes no edge.

Location ids are chosen canonically: each program point takes the source
line of the statement it is about to execute when that number is still free,
and the next free integer above it otherwise.  Statement order makes the
numbering deterministic; witnesses are matched by line numbers, not by
location ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..logic import ast as A
from ..logic.machine import MAX_WIDTH, MIN_WIDTH, DEFAULT_WIDTH, SymbolTable
from ..logic.parser import ExprSyntaxError, Token, TokenCursor, parse_bexp, parse_aexp, tokenize
from .cfa import (
    Assign,
    Assume,
    Call,
    Cfa,
    Edge,
    ErrorLabel,
    Havoc,
    IrreducibleFlowError,
    ReturnOp,
    SafetyProperty,
    detect_loop_heads,
)

RESERVED = {"int", "unsigned", "void", "while", "if", "else", "return", "assert", "true", "false", "nondet", "verifier_error", "Error", "main"}


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


class PropertyExtractionError(Exception):
    pass


@dataclass(frozen=True)
class Program:
    text: str
    path: str = "<memory>"

    @classmethod
    def from_file(cls, path: str | Path) -> "Program":
        p = Path(path)
        return cls(p.read_text(encoding="utf-8"), str(p))


# --------------------------------------------------------------------------
# Statement AST
# --------------------------------------------------------------------------


@dataclass
class SDecl:
    signed: bool
    declarators: list[tuple[str, Union[A.AExp, str, None]]]  # init is AExp, "nondet" or None
    line: int


@dataclass
class SAssign:
    name: str
    rhs: Union[A.AExp, str]  # "nondet" for havoc
    line: int


@dataclass
class SIf:
    cond: A.BExp
    then: list
    els: list
    line: int
    end_line: int


@dataclass
class SWhile:
    cond: A.BExp
    body: list
    line: int
    end_line: int


@dataclass
class SReturn:
    line: int


@dataclass
class SCall:
    name: str
    line: int


@dataclass
class SError:
    line: int
    origin: str  # "label" | "call"


@dataclass
class SAssert:
    cond: A.BExp
    line: int


Stmt = Union[SDecl, SAssign, SIf, SWhile, SReturn, SCall, SError, SAssert]


@dataclass(frozen=True)
class PropertySite:
    """One occurrence of a safety-property encoding in the source."""

    style: str  # "error_label" | "verifier_error_call" | "assert_stmt"
    condition: Optional[A.BExp]  # the positive condition; None for a bare error label
    start_line: int
    end_line: int
    indent: str


@dataclass
class ProgramAst:
    main: list
    procedures: dict[str, int]  # helper name -> definition line (bodies are empty)
    symtab: SymbolTable
    property_sites: list[PropertySite]
    close_line: int  # line of main's closing brace


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


class _ProgramParser:
    def __init__(self, text: str, width: int):
        self.text = text
        try:
            self.cur = TokenCursor(tokenize(text))
        except ExprSyntaxError as exc:
            raise ParseError(exc.message, exc.line, exc.col) from None
        self.signs: dict[str, bool] = {}
        self.width = width
        self.procedures: dict[str, int] = {}
        self.sites: list[PropertySite] = []
        self.lines = text.splitlines()

    def fail(self, message: str) -> ParseError:
        tok = self.cur.peek()
        return ParseError(message, tok.line, tok.col)

    def parse(self) -> ProgramAst:
        main_body: list | None = None
        close_line = 0
        while self.cur.peek().kind != "eof":
            tok = self.cur.peek()
            if self.cur.accept("void"):
                name_tok = self._ident("procedure name")
                if name_tok.text in RESERVED:
                    raise ParseError(f"reserved name {name_tok.text!r}", name_tok.line, name_tok.col)
                self.cur.expect("(")
                self.cur.expect(")")
                self.cur.expect("{")
                if not self.cur.at("}"):
                    raise self.fail("helper procedure bodies must be empty")
                self.cur.expect("}")
                if name_tok.text in self.procedures:
                    raise ParseError(f"duplicate procedure {name_tok.text!r}", name_tok.line, name_tok.col)
                self.procedures[name_tok.text] = name_tok.line
            elif self.cur.accept("int"):
                name_tok = self._ident("procedure name")
                if name_tok.text != "main":
                    raise ParseError("only 'int main()' may return int", name_tok.line, name_tok.col)
                if main_body is not None:
                    raise ParseError("duplicate main procedure", name_tok.line, name_tok.col)
                self.cur.expect("(")
                self.cur.expect(")")
                self.cur.expect("{")
                main_body = self._statements(stop="}")
                close_line = self.cur.peek().line
                self.cur.expect("}")
            else:
                raise self.fail(f"expected a procedure definition, found {tok.text!r}")
        if main_body is None:
            raise ParseError("no entry procedure 'int main()' found", 1)
        self._collect_sites(main_body)
        ast = ProgramAst(
            main=main_body,
            procedures=self.procedures,
            symtab=SymbolTable(self.width, dict(self.signs)),
            property_sites=self.sites,
            close_line=close_line,
        )
        self._check_variables(ast)
        return ast

    def _ident(self, what: str) -> Token:
        tok = self.cur.peek()
        if tok.kind != "ident":
            raise self.fail(f"expected {what}")
        return self.cur.advance()

    def _statements(self, stop: str) -> list:
        out = []
        while not self.cur.at(stop):
            if self.cur.peek().kind == "eof":
                raise self.fail(f"unexpected end of input, expected {stop!r}")
            out.append(self._statement())
        return out

    def _block_or_single(self) -> tuple[list, int]:
        """Returns the statements and the line of the last consumed token."""
        if self.cur.accept("{"):
            stmts = self._statements(stop="}")
            end = self.cur.peek().line
            self.cur.expect("}")
            return stmts, end
        stmt = self._statement()
        return [stmt], self._last_line()

    def _last_line(self) -> int:
        return self.cur.tokens[max(self.cur.pos - 1, 0)].line

    def _statement(self) -> Stmt:
        tok = self.cur.peek()
        if self.cur.at("void"):
            raise ParseError("nested procedure definitions are not supported", tok.line, tok.col)
        if self.cur.accept("unsigned"):
            self.cur.expect("int")
            return self._declaration(signed=False, line=tok.line)
        if self.cur.at("int"):
            nxt = self.cur.tokens[self.cur.pos + 1]
            if nxt.text == "main":
                raise ParseError("nested procedure definitions are not supported", tok.line, tok.col)
            self.cur.advance()
            return self._declaration(signed=True, line=tok.line)
        if self.cur.accept("while"):
            self.cur.expect("(")
            cond = self._bexp()
            self.cur.expect(")")
            body, end = self._block_or_single()
            return SWhile(cond, body, tok.line, end)
        if self.cur.accept("if"):
            self.cur.expect("(")
            cond = self._bexp()
            self.cur.expect(")")
            then, end = self._block_or_single()
            els: list = []
            if self.cur.accept("else"):
                els, end = self._block_or_single()
            return SIf(cond, then, els, tok.line, end)
        if self.cur.accept("return"):
            if not self.cur.at(";"):
                self._aexp()  # value is parsed and discarded
            self.cur.expect(";")
            return SReturn(tok.line)
        if self.cur.accept("assert"):
            self.cur.expect("(")
            cond = self._bexp()
            self.cur.expect(")")
            self.cur.expect(";")
            return SAssert(cond, tok.line)
        if tok.kind == "ident" and tok.text == "Error":
            self.cur.advance()
            self.cur.expect(":")
            self.cur.expect("return")
            if not self.cur.at(";"):
                self._aexp()
            self.cur.expect(";")
            return SError(tok.line, "label")
        if tok.kind == "ident":
            name = self.cur.advance()
            if self.cur.accept("("):
                self.cur.expect(")")
                self.cur.expect(";")
                if name.text == "verifier_error":
                    return SError(name.line, "call")
                return SCall(name.text, name.line)
            if self.cur.accept("++"):
                self.cur.expect(";")
                return SAssign(name.text, A.BinOp("+", A.Var(name.text), A.IntLit(1)), name.line)
            if self.cur.accept("--"):
                self.cur.expect(";")
                return SAssign(name.text, A.BinOp("-", A.Var(name.text), A.IntLit(1)), name.line)
            self.cur.expect("=")
            rhs = self._rhs()
            self.cur.expect(";")
            return SAssign(name.text, rhs, name.line)
        raise self.fail(f"unexpected token {tok.text!r}")

    def _declaration(self, signed: bool, line: int) -> SDecl:
        declarators: list[tuple[str, Union[A.AExp, str, None]]] = []
        while True:
            name_tok = self._ident("variable name")
            name = name_tok.text
            if name in RESERVED:
                raise ParseError(f"reserved name {name!r}", name_tok.line, name_tok.col)
            if name in self.signs:
                raise ParseError(f"duplicate declaration of {name!r}", name_tok.line, name_tok.col)
            self.signs[name] = signed
            init: Union[A.AExp, str, None] = None
            if self.cur.accept("="):
                init = self._rhs()
            declarators.append((name, init))
            if not self.cur.accept(","):
                break
        self.cur.expect(";")
        return SDecl(signed, declarators, line)

    def _rhs(self) -> Union[A.AExp, str]:
        tok = self.cur.peek()
        if tok.kind == "ident" and tok.text == "nondet":
            self.cur.advance()
            self.cur.expect("(")
            self.cur.expect(")")
            return "nondet"
        return self._aexp()

    def _bexp(self) -> A.BExp:
        try:
            return parse_bexp(self.cur)
        except ExprSyntaxError as exc:
            raise ParseError(exc.message, exc.line, exc.col) from None

    def _aexp(self) -> A.AExp:
        try:
            return parse_aexp(self.cur)
        except ExprSyntaxError as exc:
            raise ParseError(exc.message, exc.line, exc.col) from None

    def _indent_of(self, line: int) -> str:
        text = self.lines[line - 1] if 0 < line <= len(self.lines) else ""
        return text[: len(text) - len(text.lstrip())]

    def _collect_sites(self, stmts: list) -> None:
        """Record property encodings: asserts, guarded errors (an if whose
        then-branch is exactly the error, no else) and bare error labels."""
        for s in stmts:
            if isinstance(s, SAssert):
                self.sites.append(
                    PropertySite("assert_stmt", s.cond, s.line, s.line, self._indent_of(s.line))
                )
            elif isinstance(s, SIf):
                if not s.els and len(s.then) == 1 and isinstance(s.then[0], SError):
                    err: SError = s.then[0]
                    style = "error_label" if err.origin == "label" else "verifier_error_call"
                    self.sites.append(
                        PropertySite(style, A.negate(s.cond), s.line, s.end_line, self._indent_of(s.line))
                    )
                else:
                    self._collect_sites(s.then)
                    self._collect_sites(s.els)
            elif isinstance(s, SWhile):
                self._collect_sites(s.body)
            elif isinstance(s, SError):
                style = "error_label" if s.origin == "label" else "verifier_error_call"
                self.sites.append(PropertySite(style, None, s.line, s.line, self._indent_of(s.line)))

    def _check_variables(self, ast: ProgramAst) -> None:
        declared = set(self.signs)

        def check_expr(e: A.Expr, line: int) -> None:
            for name in sorted(A.free_vars(e)):
                if name not in declared:
                    raise ParseError(f"use of undeclared variable {name!r}", line)

        def visit(stmts: list) -> None:
            for s in stmts:
                if isinstance(s, SDecl):
                    for _, init in s.declarators:
                        if isinstance(init, (A.IntLit, A.Var, A.Neg, A.BinOp)):
                            check_expr(init, s.line)
                elif isinstance(s, SAssign):
                    if s.name not in declared:
                        raise ParseError(f"assignment to undeclared variable {s.name!r}", s.line)
                    if not isinstance(s.rhs, str):
                        check_expr(s.rhs, s.line)
                elif isinstance(s, SIf):
                    check_expr(s.cond, s.line)
                    visit(s.then)
                    visit(s.els)
                elif isinstance(s, SWhile):
                    check_expr(s.cond, s.line)
                    visit(s.body)
                elif isinstance(s, SAssert):
                    check_expr(s.cond, s.line)
                elif isinstance(s, SCall):
                    if s.name not in self.procedures:
                        raise ParseError(f"call to undefined procedure {s.name!r}", s.line)

        visit(ast.main)


# --------------------------------------------------------------------------
# CFA construction
# --------------------------------------------------------------------------


class _CfaBuilder:
    def __init__(self, ast: ProgramAst, program: Program):
        self.ast = ast
        self.program = program
        self.used: set[int] = set()
        self.line_map: dict[int, int] = {}
        self.edges: list[Edge] = []
        self.loop_heads: set[int] = set()
        self.loop_spans: dict[int, tuple[int, int]] = {}

    def fresh(self, want_line: int) -> int:
        loc = max(want_line, 1)
        while loc in self.used:
            loc += 1
        self.used.add(loc)
        self.line_map[loc] = want_line
        return loc

    def emit(self, src: int, op, dst: int, line: int) -> None:
        self.edges.append(Edge(src, op, dst, line))

    def build(self) -> Cfa:
        first_line = self.ast.main[0].line if self.ast.main else self.ast.close_line
        entry = self.fresh(first_line)
        exit_loc = self.fresh(self.ast.close_line)
        self.exit = exit_loc
        self.seq(self.ast.main, entry, exit_loc, following_line=self.ast.close_line)
        locations = frozenset(self.used)
        heads = detect_loop_heads(locations, entry, [(e.source, e.target) for e in self.edges])
        syntactic = frozenset(self.loop_heads)
        if heads != syntactic:  # pragma: no cover - structured loops keep these equal
            raise IrreducibleFlowError(
                f"loop heads from dominators {sorted(heads)} disagree with loop statements {sorted(syntactic)}"
            )
        return Cfa(
            locations=locations,
            initial=entry,
            exit=exit_loc,
            edges=tuple(self.edges),
            loop_heads=heads,
            line_map=dict(self.line_map),
            symtab=self.ast.symtab,
            source_text=self.program.text,
            source_path=self.program.path,
            loop_spans=dict(self.loop_spans),
        )

    def seq(self, stmts: list, entry: int, cont: int, following_line: int) -> None:
        cur = entry
        for i, stmt in enumerate(stmts):
            is_last = i == len(stmts) - 1
            next_line = stmts[i + 1].line if not is_last else following_line
            # declarations without initializers produce no edge and no location
            if isinstance(stmt, SDecl) and not any(init is not None for _, init in stmt.declarators):
                if is_last and cur != cont:
                    self._relink(stmts, i, cur, cont)
                continue
            nxt = cont if is_last else self.fresh(next_line)
            self.stmt(stmt, cur, nxt)
            cur = nxt

    def _relink(self, stmts, i, cur, cont) -> None:
        raise ParseError(
            "a trailing declaration without initializer cannot end a branch", stmts[i].line
        )

    def stmt(self, s: Stmt, entry: int, cont: int) -> None:
        if isinstance(s, SDecl):
            inits = [(name, init) for name, init in s.declarators if init is not None]
            cur = entry
            for j, (name, init) in enumerate(inits):
                nxt = cont if j == len(inits) - 1 else self.fresh(s.line)
                op = Havoc(name) if init == "nondet" else Assign(name, init)
                self.emit(cur, op, nxt, s.line)
                cur = nxt
        elif isinstance(s, SAssign):
            op = Havoc(s.name) if s.rhs == "nondet" else Assign(s.name, s.rhs)
            self.emit(entry, op, cont, s.line)
        elif isinstance(s, SWhile):
            head = entry
            self.loop_heads.add(head)
            self.loop_spans[head] = (s.line, s.end_line)
            if s.body:
                body_entry = self.fresh(s.body[0].line)
                self.emit(head, Assume(s.cond, True), body_entry, s.line)
                self.seq(s.body, body_entry, head, following_line=s.end_line)
            else:
                self.emit(head, Assume(s.cond, True), head, s.line)
            self.emit(head, Assume(s.cond, False), cont, s.line)
        elif isinstance(s, SIf):
            if s.then:
                then_entry = self.fresh(s.then[0].line)
                self.emit(entry, Assume(s.cond, True), then_entry, s.line)
                self.seq(s.then, then_entry, cont, following_line=s.end_line)
            else:
                self.emit(entry, Assume(s.cond, True), cont, s.line)
            if s.els:
                else_entry = self.fresh(s.els[0].line)
                self.emit(entry, Assume(s.cond, False), else_entry, s.line)
                self.seq(s.els, else_entry, cont, following_line=s.end_line)
            else:
                self.emit(entry, Assume(s.cond, False), cont, s.line)
        elif isinstance(s, SReturn):
            self.emit(entry, ReturnOp(), self.exit, s.line)
        elif isinstance(s, SCall):
            self.emit(entry, Call(s.name), cont, s.line)
        elif isinstance(s, SError):
            self.emit(entry, ErrorLabel(), self.exit, s.line)
        elif isinstance(s, SAssert):
            guard = A.negate(s.cond)
            err_entry = self.fresh(s.line)
            self.emit(entry, Assume(guard, True), err_entry, s.line)
            self.emit(err_entry, ErrorLabel(), self.exit, s.line)
            self.emit(entry, Assume(guard, False), cont, s.line)
        else:  # pragma: no cover
            raise TypeError(f"unknown statement {s!r}")


def parse_ast(program: Program, width: int = DEFAULT_WIDTH) -> ProgramAst:
    if not MIN_WIDTH <= width <= MAX_WIDTH:
        raise ValueError(f"width {width} outside {MIN_WIDTH}..{MAX_WIDTH}")
    return _ProgramParser(program.text, width).parse()


def parse(program: Program, width: int = DEFAULT_WIDTH) -> Cfa:
    """Parse source text into a control-flow automaton.

    Deterministic: identical text yields structurally identical automata.
    """
    ast = parse_ast(program, width)
    return _CfaBuilder(ast, program).build()


def extract_properties(cfa: Cfa) -> list[SafetyProperty]:
    """Derive one safety property per error label.

    A guarded error (single incoming assume edge) yields the guard's source
    location with the negated guard condition; an unguarded error yields the
    error edge's own source with condition ``false``.
    """
    props: list[SafetyProperty] = []
    seen: set[tuple[int, str]] = set()
    for e in cfa.edges:
        if not isinstance(e.op, ErrorLabel):
            continue
        incoming = cfa.incoming(e.source)
        if len(incoming) == 1 and isinstance(incoming[0].op, Assume):
            guard_edge = incoming[0]
            prop = SafetyProperty(guard_edge.source, A.negate(guard_edge.op.effective))
        else:
            prop = SafetyProperty(e.source, A.FALSE)
        key = (prop.location, A.to_source(prop.condition))
        if key not in seen:
            seen.add(key)
            props.append(prop)
    if not props:
        raise PropertyExtractionError("no error label found in the program")
    return props


def extract_property(cfa: Cfa) -> SafetyProperty:
    """The single safety property of the program (error when ambiguous)."""
    props = extract_properties(cfa)
    if len(props) > 1:
        raise PropertyExtractionError(
            f"{len(props)} safety properties found; verify them individually"
        )
    return props[0]
