"""Tokenizer and recursive-descent parser for the C-like expression syntax.

The same token stream format is reused by the language frontend for whole
programs; this module only knows about expressions, which is also exactly the
syntax accepted for invariants inside witness documents.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast as A


class ExprSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'number' | 'punct' | 'eof'
    text: str
    line: int
    col: int


_PUNCT = [
    "==>",
    "==",
    "!=",
    "<=",
    ">=",
    "&&",
    "||",
    "++",
    "--",
    "<",
    ">",
    "!",
    "=",
    "+",
    "-",
    "*",
    "/",
    "(",
    ")",
    "{",
    "}",
    ";",
    ",",
    ":",
]


def tokenize(text: str) -> list[Token]:
    """Tokenize source text; strips ``//`` and ``/* */`` comments."""
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ExprSyntaxError("unterminated comment", line, col)
            skipped = text[i : end + 2]
            line += skipped.count("\n")
            col = len(skipped) - skipped.rfind("\n") if "\n" in skipped else col + len(skipped)
            i = end + 2
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("number", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class TokenCursor:
    """Shared cursor over a token list; the frontend builds on it too."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind in ("punct", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            raise ExprSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return self.advance()

    def error(self, message: str) -> ExprSyntaxError:
        tok = self.peek()
        return ExprSyntaxError(message, tok.line, tok.col)


# Expression grammar, loosest first:
#   bexp     := implies
#   implies  := or ('==>' implies)?
#   or       := and ('||' and)*
#   and      := unary ('&&' unary)*
#   unary    := '!' unary | 'true' | 'false' | cmp | '(' bexp ')'
#   cmp      := aexp (CMPOP aexp)?
#   aexp     := term (('+'|'-') term)*
#   term     := factor (('*'|'/') factor)*
#   factor   := NUMBER | IDENT | '-' factor | '(' aexp ')'
#
# A parenthesized group is parsed as a boolean expression first and
# re-interpreted as arithmetic when followed by an arithmetic operator.


def parse_bexp(cur: TokenCursor) -> A.BExp:
    return _implies(cur)


def parse_aexp(cur: TokenCursor) -> A.AExp:
    e = _aexp(cur)
    return e


def _implies(cur: TokenCursor) -> A.BExp:
    left = _or(cur)
    if cur.accept("==>"):
        right = _implies(cur)
        return A.Implies(_as_bexp(cur, left), right)
    return _as_bexp(cur, left)


def _or(cur: TokenCursor) -> A.Expr:
    left = _and(cur)
    while cur.at("||"):
        cur.advance()
        right = _and(cur)
        left = A.Or(_as_bexp(cur, left), _as_bexp(cur, right))
    return left


def _and(cur: TokenCursor) -> A.Expr:
    left = _unary(cur)
    while cur.at("&&"):
        cur.advance()
        right = _unary(cur)
        left = A.And(_as_bexp(cur, left), _as_bexp(cur, right))
    return left


def _unary(cur: TokenCursor) -> A.Expr:
    if cur.accept("!"):
        return A.Not(_as_bexp(cur, _unary(cur)))
    tok = cur.peek()
    if tok.kind == "ident" and tok.text in ("true", "false"):
        cur.advance()
        return A.BoolLit(tok.text == "true")
    return _cmp(cur)


def _cmp(cur: TokenCursor) -> A.Expr:
    left = _aexp(cur)
    tok = cur.peek()
    if tok.kind == "punct" and tok.text in A.CMP_OPS:
        cur.advance()
        right = _aexp(cur)
        return A.Cmp(tok.text, _as_aexp(cur, left), _as_aexp(cur, right))
    return left


def _aexp(cur: TokenCursor) -> A.Expr:
    left = _term(cur)
    while cur.peek().kind == "punct" and cur.peek().text in ("+", "-"):
        op = cur.advance().text
        right = _term(cur)
        left = A.BinOp(op, _as_aexp(cur, left), _as_aexp(cur, right))
    return left


def _term(cur: TokenCursor) -> A.Expr:
    left = _factor(cur)
    while cur.peek().kind == "punct" and cur.peek().text in ("*", "/"):
        op = cur.advance().text
        right = _factor(cur)
        left = A.BinOp(op, _as_aexp(cur, left), _as_aexp(cur, right))
    return left


def _factor(cur: TokenCursor) -> A.Expr:
    tok = cur.peek()
    if tok.kind == "number":
        cur.advance()
        return A.IntLit(int(tok.text))
    if tok.kind == "ident":
        if tok.text in ("true", "false"):
            cur.advance()
            return A.BoolLit(tok.text == "true")
        cur.advance()
        return A.Var(tok.text)
    if cur.accept("-"):
        return A.Neg(_as_aexp(cur, _factor(cur)))
    if cur.accept("("):
        inner = _implies(cur)
        cur.expect(")")
        return inner
    raise cur.error(f"expected an expression, found {tok.text!r}")


def _as_bexp(cur: TokenCursor, e: A.Expr) -> A.BExp:
    if isinstance(e, (A.BoolLit, A.Cmp, A.Not, A.And, A.Or, A.Implies)):
        return e
    raise cur.error(f"expected a boolean expression, found arithmetic {A.to_source(e)!r}")


def _as_aexp(cur: TokenCursor, e: A.Expr) -> A.AExp:
    if isinstance(e, (A.IntLit, A.Var, A.Neg, A.BinOp)):
        return e
    raise cur.error(f"expected an arithmetic expression, found {A.to_source(e)!r}")


def parse_expression(text: str) -> A.BExp:
    """Parse a standalone boolean expression (the witness invariant syntax)."""
    cur = TokenCursor(tokenize(text))
    e = parse_bexp(cur)
    tok = cur.peek()
    if tok.kind != "eof":
        raise ExprSyntaxError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return e


def parse_arith(text: str) -> A.AExp:
    """Parse a standalone arithmetic expression (used by namespace maps)."""
    cur = TokenCursor(tokenize(text))
    e = _aexp(cur)
    tok = cur.peek()
    if tok.kind != "eof":
        raise ExprSyntaxError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return _as_aexp(cur, e)
