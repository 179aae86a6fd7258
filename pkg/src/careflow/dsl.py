"""Parser and canonical printer for the guideline criteria DSL.

Grammar (whitespace insignificant outside tokens):

    rule  := atom | "ANY(" rules ")" | "ALL(" rules ")"
           | "ATLEAST(" int "," rules ")" | "NOT(" rule ")"
    rules := rule { "," rule }
    atom  := "has(" code ")" | "cmp(" code op literal ")"
           | "demo(" key "=" value ")"
           | "event(" kind "," code [ "," "within" int "d" ] ")"
    code  := namespace ":" token
    op    := "<" | "<=" | "=" | ">=" | ">" | "!="

Canonical printing uses uppercase combinators, a single space after commas,
spaces around comparison operators, and no space inside parentheses; parsing
the canonical text reproduces a structurally equal rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .rules import (
    AllOf,
    AnyOf,
    AtLeast,
    Compare,
    Demo,
    HadEvent,
    HasFact,
    Not,
    Rule,
    is_atom,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<code>[a-z][a-z0-9_]*:[A-Za-z0-9][A-Za-z0-9_.\-]*)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.\-]*)
  | (?P<op><=|>=|!=|<|>|=)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


_EOF = "end of input"


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        lexeme = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _fail(self, expected: str):
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            line = last.line if last else 1
            col = last.column + len(last.text) if last else 1
            raise ParseError(f"expected {expected}, found {_EOF}", line, col)
        raise ParseError(f"expected {expected}, found {tok.text!r}", tok.line, tok.column)

    def _next(self, kind: str, expected: str) -> _Token:
        tok = self._peek()
        if tok is None or tok.kind != kind:
            self._fail(expected)
        self.pos += 1
        return tok

    def _accept(self, kind: str, text: str | None = None) -> _Token | None:
        tok = self._peek()
        if tok is not None and tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return tok
        return None

    def parse(self) -> Rule:
        rule = self.rule()
        tok = self._peek()
        if tok is not None:
            raise ParseError(
                f"expected {_EOF}, found {tok.text!r}", tok.line, tok.column
            )
        return rule

    def rule(self) -> Rule:
        tok = self._peek()
        if tok is None:
            self._fail("a rule")
        if tok.kind == "ident":
            head = tok.text
            if head == "ANY":
                return self._combinator(AnyOf, "ANY")
            if head == "ALL":
                return self._combinator(AllOf, "ALL")
            if head == "NOT":
                self.pos += 1
                self._next("lparen", "'('")
                child = self.rule()
                self._next("rparen", "')'")
                return Not(child)
            if head == "ATLEAST":
                return self._at_least(tok)
            if head in ("has", "cmp", "demo", "event"):
                return self._atom(head)
        self._fail("a rule (ANY, ALL, ATLEAST, NOT, has, cmp, demo, or event)")

    def _combinator(self, cls, name: str) -> Rule:
        self.pos += 1
        self._next("lparen", "'('")
        children = self._rules()
        self._next("rparen", "')'")
        return cls(children=tuple(children))

    def _at_least(self, head: _Token) -> Rule:
        self.pos += 1
        self._next("lparen", "'('")
        n_tok = self._next("number", "an integer")
        if "." in n_tok.text:
            raise ParseError("ATLEAST count must be an integer", n_tok.line, n_tok.column)
        self._next("comma", "','")
        children = self._rules()
        self._next("rparen", "')'")
        n = int(n_tok.text)
        if not 1 <= n <= len(children):
            raise ParseError(
                f"ATLEAST count {n} out of range for {len(children)} children",
                n_tok.line,
                n_tok.column,
            )
        return AtLeast(n=n, children=tuple(children))

    def _rules(self) -> list[Rule]:
        rules = [self.rule()]
        while self._accept("comma"):
            rules.append(self.rule())
        return rules

    def _atom(self, head: str) -> Rule:
        self.pos += 1
        self._next("lparen", "'('")
        if head == "has":
            code = self._next("code", "a namespaced code").text
            self._next("rparen", "')'")
            return HasFact(code)
        if head == "cmp":
            code = self._next("code", "a namespaced code").text
            op_tok = self._next("op", "a comparison operator")
            value = self._literal(op_tok)
            self._next("rparen", "')'")
            try:
                atom = Compare(code, op_tok.text, value)
            except ValueError as exc:
                raise ParseError(str(exc), op_tok.line, op_tok.column) from None
            return atom
        if head == "demo":
            key = self._next("ident", "a demographics key").text
            op = self._next("op", "'='")
            if op.text != "=":
                raise ParseError("demo atoms use '='", op.line, op.column)
            value_tok = self._peek()
            if value_tok is None or value_tok.kind not in ("ident", "number"):
                self._fail("a demographics value")
            self.pos += 1
            self._next("rparen", "')'")
            return Demo(key, value_tok.text)
        # event(kind, code [, within N d])
        kind = self._next("ident", "an event kind").text
        self._next("comma", "','")
        code = self._next("code", "a namespaced code").text
        within = None
        if self._accept("comma"):
            kw = self._next("ident", "'within'")
            if kw.text != "within":
                raise ParseError("expected 'within'", kw.line, kw.column)
            n_tok = self._next("number", "an integer day count")
            if "." in n_tok.text:
                raise ParseError("day count must be an integer", n_tok.line, n_tok.column)
            unit = self._next("ident", "'d'")
            if unit.text != "d":
                raise ParseError("expected 'd' after the day count", unit.line, unit.column)
            within = int(n_tok.text)
        self._next("rparen", "')'")
        return HadEvent(kind, code, within)

    def _literal(self, op_tok: _Token):
        tok = self._peek()
        if tok is None:
            self._fail("a literal")
        if tok.kind == "number":
            self.pos += 1
            return float(tok.text) if "." in tok.text else int(tok.text)
        if tok.kind in ("ident", "code"):
            self.pos += 1
            return tok.text
        self._fail("a number or label literal")


def parse_rule(text: str) -> Rule:
    """Parse DSL text into a rule tree; errors carry 1-based line/column."""
    return _Parser(text).parse()


def _fmt_literal(value) -> str:
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def print_rule(rule: Rule) -> str:
    """Canonical DSL text; parse_rule(print_rule(r)) is structurally r."""
    if isinstance(rule, HasFact):
        return f"has({rule.code})"
    if isinstance(rule, Compare):
        return f"cmp({rule.code} {rule.op} {_fmt_literal(rule.value)})"
    if isinstance(rule, Demo):
        return f"demo({rule.key}={rule.value})"
    if isinstance(rule, HadEvent):
        if rule.within_days is None:
            return f"event({rule.kind}, {rule.code})"
        return f"event({rule.kind}, {rule.code}, within {rule.within_days}d)"
    if isinstance(rule, Not):
        return f"NOT({print_rule(rule.child)})"
    if isinstance(rule, AllOf):
        return "ALL(" + ", ".join(print_rule(c) for c in rule.children) + ")"
    if isinstance(rule, AnyOf):
        return "ANY(" + ", ".join(print_rule(c) for c in rule.children) + ")"
    if isinstance(rule, AtLeast):
        inner = ", ".join(print_rule(c) for c in rule.children)
        return f"ATLEAST({rule.n}, {inner})"
    raise TypeError(f"not a rule: {rule!r}")
