"""
pepa_parser.py
──────────────
Reads and writes the `.pepa` model format.

    X = (a,1.0).Y;          // constant definitions (sequential terms)
    Y = (b,2).X + (c,T).Y;
    high {h};               // optional high action set
    system X <a> Y/{c};     // exactly one system declaration

Rates are integers, decimals, `p/q` fractions, `T` or `k*T`. Cooperation is
left-associative and `<>` is the empty cooperation set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from pepa_model import (
    NIL,
    TAU,
    Activity,
    Choice,
    Const,
    Coop,
    Diagnostic,
    Hide,
    ModelEnv,
    PepaError,
    Prefix,
    Rate,
    SourceSpan,
    Term,
    format_term,
    is_sequential,
)

KEYWORDS = frozenset({"system", "high"})
PASSIVE  = "T"

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t\r\n\f]+)
    | (?P<comment>//[^\n]*)
    | (?P<number>\d+(?:\.\d+|/\d+)?)
    | (?P<uident>[A-Z][A-Za-z0-9_']*)
    | (?P<lident>[a-z][A-Za-z0-9_']*)
    | (?P<symbol>[=;+(),.<>/{}*])
    """,
    re.VERBOSE,
)


class ParseError(PepaError):
    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SourceModel:
    text: str
    filename: str = "<string>"


@dataclass(frozen=True)
class Token:
    kind: str      # number | uident | lident | symbol | eof
    value: str
    span: SourceSpan

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.value)


def tokenize(source: SourceModel) -> list[Token]:
    text, tokens = source.text, []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        span = SourceSpan(source.filename, line, pos - line_start + 1)
        if m is None:
            raise ParseError([Diagnostic("lexical", f"unexpected character {text[pos]!r}", span)])
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), span))
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(source.filename, line, pos - line_start + 1)))
    return tokens


class _Abort(Exception):
    pass


class Parser:
    """Recursive descent over the token list with two tokens of lookahead."""

    def __init__(self, source: SourceModel) -> None:
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []

    # ── token helpers ─────────────────────────────────────────────────────────

    @property
    def nt(self) -> Token:
        return self.tokens[self.pos]

    def lookahead(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.nt
        if token.kind != "eof":
            self.pos += 1
        return token

    def peek(self, value: str) -> bool:
        return self.nt.kind == "symbol" and self.nt.value == value

    def peek_kw(self, value: str) -> bool:
        return self.nt.kind == "lident" and self.nt.value == value

    def fail(self, message: str, token: Token | None = None) -> None:
        token = token or self.nt
        self.diagnostics.append(Diagnostic("syntax", message, token.span))
        raise _Abort

    def match(self, value: str) -> Token:
        if not self.peek(value):
            self.fail(f"expected {value!r}, found {self.nt.describe()}")
        return self.advance()

    def match_kind(self, kind: str, what: str) -> Token:
        if self.nt.kind != kind:
            self.fail(f"expected {what}, found {self.nt.describe()}")
        return self.advance()

    # ── grammar ───────────────────────────────────────────────────────────────

    def parse(self, require_system: bool = True) -> ModelEnv:
        defs: dict[str, Term] = {}
        spans: dict[str, SourceSpan] = {}
        high: frozenset[str] | None = None
        root: Term | None = None
        try:
            while self.nt.kind != "eof":
                if self.nt.kind == "uident":
                    name_token = self.advance()
                    name = name_token.value
                    if name == PASSIVE:
                        self.fail("'T' is reserved for passive rates", name_token)
                    self.match("=")
                    body = self.choice()
                    self.match(";")
                    if name in defs:
                        self.diagnostics.append(
                            Diagnostic("duplicate", f"duplicate definition of constant {name}", name_token.span)
                        )
                    else:
                        defs[name] = body
                        spans[name] = name_token.span
                elif self.peek_kw("high"):
                    kw = self.advance()
                    self.match("{")
                    actions = self.action_list("high set", allow_empty=False)
                    self.match("}")
                    self.match(";")
                    if high is not None:
                        self.diagnostics.append(Diagnostic("duplicate", "duplicate high declaration", kw.span))
                    high = actions
                    spans["high"] = kw.span
                elif self.peek_kw("system"):
                    kw = self.advance()
                    term = self.modexpr()
                    self.match(";")
                    if root is not None:
                        self.diagnostics.append(Diagnostic("duplicate", "duplicate system declaration", kw.span))
                    root = term
                    spans["system"] = kw.span
                else:
                    self.fail(f"expected a definition, 'high' or 'system', found {self.nt.describe()}")
        except _Abort:
            raise ParseError(self.diagnostics) from None

        if root is None:
            if require_system:
                self.diagnostics.append(Diagnostic("missing-system", "missing system declaration", self.nt.span))
            root = NIL
        if self.diagnostics:
            raise ParseError(self.diagnostics)
        return ModelEnv(defs, root, high or frozenset(), spans)

    def action(self) -> str:
        token = self.match_kind("lident", "an action name")
        if token.value in KEYWORDS:
            self.fail(f"{token.value!r} is a keyword, not an action name", token)
        return token.value

    def action_list(self, where: str, allow_empty: bool) -> frozenset[str]:
        closing = "}" if where != "cooperation set" else ">"
        actions: list[str] = []
        if allow_empty and self.peek(closing):
            return frozenset()
        while True:
            token = self.nt
            name = self.action()
            if name == TAU:
                self.fail(f"tau is not allowed in a {where}", token)
            actions.append(name)
            if not self.peek(","):
                return frozenset(actions)
            self.advance()

    def rate(self) -> Rate:
        token = self.nt
        if token.kind == "uident" and token.value == PASSIVE:
            self.advance()
            return Rate.top()
        number = self.match_kind("number", "a rate")
        denominator = number.value.partition("/")[2]
        if denominator and int(denominator) == 0:
            self.fail("rate denominator must not be zero", number)
        value = Fraction(number.value)
        if self.peek("*"):
            if not number.value.isdigit():
                self.fail("passive weights must be integers", number)
            self.advance()
            weight_end = self.match_kind("uident", "'T'")
            if weight_end.value != PASSIVE:
                self.fail(f"expected 'T', found {weight_end.describe()}", weight_end)
            passive = True
        else:
            passive = False
        if value <= 0:
            self.fail("rates must be positive", number)
        return Rate(value, passive)

    def choice(self) -> Term:
        term = self.prefixterm()
        while self.peek("+"):
            self.advance()
            term = Choice(term, self.prefixterm())
        return term

    def prefixterm(self) -> Term:
        token = self.nt
        if self.peek("("):
            if self.lookahead().kind == "lident":
                self.advance()
                action = self.action()
                self.match(",")
                rate = self.rate()
                self.match(")")
                self.match(".")
                return Prefix(Activity(action, rate), self.prefixterm())
            self.advance()
            term = self.choice()
            self.match(")")
            return term
        if token.kind == "uident":
            if token.value == PASSIVE:
                self.fail("'T' is reserved for passive rates", token)
            self.advance()
            return Const(token.value)
        if token.kind == "number" and token.value == "0":
            self.advance()
            return NIL
        self.fail(f"expected a prefix, constant or 0, found {token.describe()}")
        raise AssertionError("unreachable")

    def modexpr(self) -> Term:
        term = self.hidelevel()
        while self.peek("<"):
            self.advance()
            actions = self.action_list("cooperation set", allow_empty=True)
            self.match(">")
            term = Coop(term, actions, self.hidelevel())
        return term

    def hidelevel(self) -> Term:
        term = self.atom()
        while self.peek("/"):
            self.advance()
            self.match("{")
            actions = self.action_list("hiding set", allow_empty=False)
            self.match("}")
            term = Hide(term, actions)
        return term

    def atom(self) -> Term:
        if self.peek("(") and self.lookahead().kind == "lident":
            return self.choice()
        if self.peek("("):
            open_token = self.advance()
            term = self.modexpr()
            self.match(")")
            if self.peek("+") and not is_sequential(term):
                self.fail("choice operands must be sequential", open_token)
        else:
            term = self.prefixterm()
        while self.peek("+"):
            self.advance()
            term = Choice(term, self.prefixterm())
        return term


# ── public API ────────────────────────────────────────────────────────────────

def parse_model(text: str, filename: str = "<string>", *, require_system: bool = True) -> ModelEnv:
    """Parse `.pepa` text into a ModelEnv; raises ParseError with located diagnostics."""
    return Parser(SourceModel(text, filename)).parse(require_system)


def parse_file(path: str | Path, *, require_system: bool = True) -> ModelEnv:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), str(path), require_system=require_system)


def render(env: ModelEnv) -> str:
    lines = [f"{name} = {format_term(body)};" for name, body in env.defs.items()]
    if env.high:
        lines.append(f"high {{{', '.join(sorted(env.high))}}};")
    lines.append(f"system {format_term(env.root)};")
    return "\n".join(lines) + "\n"
