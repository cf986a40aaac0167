"""
pepa_model.py
─────────────
PEPA abstract syntax, exact rate algebra, model environments and static
validation.

Every value here is immutable once built. Terms are frozen dataclasses, so
structural equality doubles as state identity in the derivation graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Iterator, Mapping, Union

TAU = "tau"

_CONST_NAME  = re.compile(r"^[A-Z][A-Za-z0-9_']*$")
_ACTION_NAME = re.compile(r"^[a-z][A-Za-z0-9_']*$")


# ── errors ────────────────────────────────────────────────────────────────────

class PepaError(Exception):
    """Base class for every error raised by the checker."""


class UndefinedConstantError(PepaError):
    def __init__(self, name: str) -> None:
        super().__init__(f"undefined constant {name}")
        self.name = name


class RateError(PepaError):
    pass


class StateSpaceLimitError(PepaError):
    pass


class IncompleteModelError(PepaError):
    def __init__(self, message: str, offenders: Iterable[str] = ()) -> None:
        super().__init__(message)
        self.offenders = list(offenders)


class ReducibleChainError(PepaError):
    pass


class NotHighComponentError(PepaError):
    pass


class InvalidEnvironmentError(PepaError):
    def __init__(self, name: str, diagnostics: list[Diagnostic]) -> None:
        super().__init__(f"high environment {name} is not a valid model: " + "; ".join(str(d) for d in diagnostics))
        self.name = name
        self.diagnostics = diagnostics


class OracleLimitError(PepaError):
    pass


class UnionNotClosedError(PepaError):
    pass


# ── rationals and rates ───────────────────────────────────────────────────────

RationalLike = Union[int, str, Fraction]


def to_fraction(value: RationalLike) -> Fraction:
    """Parse "3", "1/3", "0.25" or an int/Fraction into an exact Fraction."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rates")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected an int, str or Fraction, got {value!r}")


def format_rational(x: Fraction) -> str:
    """`p/q`, or an exact decimal when the denominator only has factors 2 and 5."""
    if x.denominator == 1:
        return str(x.numerator)
    d, twos, fives = x.denominator, 0, 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    places = max(twos, fives)
    scaled = (x * 10 ** places).numerator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def fraction_text(x: Fraction) -> str:
    """Bit-exact `p/q` form used by every JSON document."""
    return f"{x.numerator}/{x.denominator}"


@total_ordering
@dataclass(frozen=True)
class Rate:
    """Active(value) or Passive(weight), the latter being weight·⊤.

    Active rates are below every passive rate; passives compare by weight.
    """

    value: Fraction
    passive: bool = False

    def __post_init__(self) -> None:
        value = to_fraction(self.value)
        if value <= 0:
            kind = "passive weight" if self.passive else "rate"
            raise RateError(f"{kind} must be positive, got {format_rational(value)}")
        object.__setattr__(self, "value", value)

    @classmethod
    def active(cls, value: RationalLike) -> Rate:
        return cls(to_fraction(value))

    @classmethod
    def top(cls, weight: RationalLike = 1) -> Rate:
        return cls(to_fraction(weight), passive=True)

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Rate):
            return NotImplemented
        return (self.passive, self.value) < (other.passive, other.value)

    def __add__(self, other: Rate) -> Rate:
        if not isinstance(other, Rate):
            return NotImplemented
        if self.passive != other.passive:
            raise RateError(f"cannot add active and passive rates ({self} + {other})")
        return Rate(self.value + other.value, self.passive)

    def __mul__(self, factor: int | Fraction) -> Rate:
        if isinstance(factor, bool) or not isinstance(factor, (int, Fraction)):
            return NotImplemented
        return Rate(self.value * factor, self.passive)

    __rmul__ = __mul__

    def ratio(self, other: Rate) -> Fraction:
        """self / other for two rates of the same kind (⊤ cancels for passives)."""
        if self.passive != other.passive:
            raise RateError(f"cannot divide {self} by {other}: rate kinds differ")
        return self.value / other.value

    def __str__(self) -> str:
        if not self.passive:
            return format_rational(self.value)
        if self.value == 1:
            return "T"
        return f"{format_rational(self.value)}*T"


# ── terms ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Activity:
    action: str
    rate: Rate

    def __str__(self) -> str:
        return f"({self.action},{self.rate})"


class Term:
    """Base of the PEPA component syntax."""

    __slots__ = ()

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True)
class Nil(Term):
    pass


@dataclass(frozen=True)
class Prefix(Term):
    activity: Activity
    body: Term


@dataclass(frozen=True)
class Choice(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Const(Term):
    name: str


@dataclass(frozen=True)
class Hide(Term):
    body: Term
    actions: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", frozenset(self.actions))


@dataclass(frozen=True)
class Coop(Term):
    left: Term
    actions: frozenset[str]
    right: Term

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", frozenset(self.actions))


NIL = Nil()


def prefix(action: str, rate: Rate | RationalLike, body: Term) -> Prefix:
    if not isinstance(rate, Rate):
        rate = Rate.active(rate)
    return Prefix(Activity(action, rate), body)


def choice(*terms: Term) -> Term:
    """Left-associated choice over one or more summands."""
    if not terms:
        raise ValueError("choice needs at least one summand")
    result = terms[0]
    for term in terms[1:]:
        result = Choice(result, term)
    return result


def is_sequential(term: Term) -> bool:
    if isinstance(term, (Nil, Const)):
        return True
    if isinstance(term, Prefix):
        return is_sequential(term.body)
    if isinstance(term, Choice):
        return is_sequential(term.left) and is_sequential(term.right)
    return False


def subterms(term: Term) -> Iterator[Term]:
    """Pre-order walk of the syntax tree; constants are not unfolded."""
    stack = [term]
    while stack:
        t = stack.pop()
        yield t
        if isinstance(t, Prefix):
            stack.append(t.body)
        elif isinstance(t, Hide):
            stack.append(t.body)
        elif isinstance(t, (Choice, Coop)):
            stack.append(t.right)
            stack.append(t.left)


def referenced_constants(term: Term) -> list[str]:
    """Constant names in order of first occurrence."""
    names: dict[str, None] = {}
    for t in subterms(term):
        if isinstance(t, Const):
            names.setdefault(t.name)
    return list(names)


# ── source locations and diagnostics ──────────────────────────────────────────

@dataclass(frozen=True)
class SourceSpan:
    filename: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: SourceSpan | None = None

    def __str__(self) -> str:
        return f"{self.span}: {self.message}" if self.span else self.message


# ── model environment ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ModelEnv:
    """Constant definitions, the system term and the high action set."""

    defs: Mapping[str, Term]
    root: Term
    high: frozenset[str] = frozenset()
    spans: Mapping[str, SourceSpan] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "defs", dict(self.defs))
        object.__setattr__(self, "high", frozenset(self.high))
        object.__setattr__(self, "spans", dict(self.spans))

    def body(self, name: str) -> Term:
        try:
            return self.defs[name]
        except KeyError:
            raise UndefinedConstantError(name) from None

    def with_root(self, root: Term) -> ModelEnv:
        return replace(self, root=root)

    def with_high(self, high: Iterable[str]) -> ModelEnv:
        return replace(self, high=frozenset(high))

    def merged(self, other: ModelEnv) -> ModelEnv:
        """Definitions of both envs; a name bound to two different bodies is an error."""
        defs = dict(self.defs)
        for name, body in other.defs.items():
            if name in defs and defs[name] != body:
                raise PepaError(f"constant {name} is defined differently in the two models")
            defs.setdefault(name, body)
        spans = {**other.spans, **self.spans}
        return ModelEnv(defs, self.root, self.high, spans)


# ── validation ────────────────────────────────────────────────────────────────

def _unguarded(term: Term) -> list[str]:
    if isinstance(term, Const):
        return [term.name]
    if isinstance(term, Choice):
        return _unguarded(term.left) + _unguarded(term.right)
    if isinstance(term, Hide):
        return _unguarded(term.body)
    if isinstance(term, Coop):
        return _unguarded(term.left) + _unguarded(term.right)
    return []


def _sequential_fragments(term: Term) -> list[Term]:
    if is_sequential(term):
        return [term]
    if isinstance(term, Hide):
        return _sequential_fragments(term.body)
    if isinstance(term, Coop):
        return _sequential_fragments(term.left) + _sequential_fragments(term.right)
    if isinstance(term, Prefix):
        return _sequential_fragments(term.body)
    if isinstance(term, Choice):
        return _sequential_fragments(term.left) + _sequential_fragments(term.right)
    return []


def _mixed_actions(term: Term) -> list[str]:
    kinds: dict[str, set[bool]] = {}
    for t in subterms(term):
        if isinstance(t, Prefix):
            kinds.setdefault(t.activity.action, set()).add(t.activity.rate.passive)
    return [a for a, seen in kinds.items() if len(seen) > 1]


def _action_names(term: Term) -> list[str]:
    names: dict[str, None] = {}
    for t in subterms(term):
        if isinstance(t, Prefix):
            names.setdefault(t.activity.action)
        elif isinstance(t, (Hide, Coop)):
            for a in sorted(t.actions):
                names.setdefault(a)
    return list(names)


def _check_term(env: ModelEnv, term: Term, where: str, span: SourceSpan | None) -> list[Diagnostic]:
    found: list[Diagnostic] = []
    for name in referenced_constants(term):
        if name not in env.defs:
            found.append(Diagnostic("undefined", f"undefined constant {name} in {where}", span))
    for action in _action_names(term):
        if not _ACTION_NAME.match(action):
            found.append(Diagnostic("bad-name", f"invalid action name {action!r} in {where}", span))
    for t in subterms(term):
        if isinstance(t, Coop) and TAU in t.actions:
            found.append(Diagnostic("tau-set", f"tau in cooperation set in {where}", span))
        elif isinstance(t, Hide) and TAU in t.actions:
            found.append(Diagnostic("tau-set", f"tau in hiding set in {where}", span))
    for fragment in _sequential_fragments(term):
        for action in _mixed_actions(fragment):
            found.append(Diagnostic("mixed-rates", f"action {action} mixes active and passive in {where}", span))
    return found


def validate(env: ModelEnv) -> list[Diagnostic]:
    """Every violated environment invariant, definitions first, then system and high set."""
    diagnostics: list[Diagnostic] = []
    for name, body in env.defs.items():
        span = env.spans.get(name)
        if not _CONST_NAME.match(name):
            diagnostics.append(Diagnostic("bad-name", f"invalid constant name {name!r}", span))
        if not is_sequential(body):
            diagnostics.append(Diagnostic("not-sequential", f"definition of {name} is not sequential", span))
        for const in dict.fromkeys(_unguarded(body)):
            diagnostics.append(
                Diagnostic("unguarded", f"unguarded constant {const} in definition of {name}", span)
            )
        diagnostics.extend(_check_term(env, body, name, span))

    system_span = env.spans.get("system")
    for t in subterms(env.root):
        if isinstance(t, Prefix) and not is_sequential(t.body):
            diagnostics.append(Diagnostic("not-sequential", "prefix body in system is not sequential", system_span))
            break
    diagnostics.extend(_check_term(env, env.root, "system", system_span))

    high_span = env.spans.get("high")
    for action in sorted(env.high):
        if action == TAU:
            diagnostics.append(Diagnostic("tau-set", "tau in high set", high_span))
        elif not _ACTION_NAME.match(action):
            diagnostics.append(Diagnostic("bad-name", f"invalid action name {action!r} in high set", high_span))
    return diagnostics


def action_alphabet(env: ModelEnv, term: Term) -> frozenset[str]:
    """Action types occurring syntactically in term and referenced bodies.

    Hiding keeps the hidden names and contributes tau.
    """
    actions: set[str] = set()
    visited: set[str] = set()
    stack = [term]
    while stack:
        for t in subterms(stack.pop()):
            if isinstance(t, Prefix):
                actions.add(t.activity.action)
            elif isinstance(t, Hide):
                actions.add(TAU)
            elif isinstance(t, Const) and t.name not in visited:
                visited.add(t.name)
                stack.append(env.body(t.name))
    return frozenset(actions)


# ── rendering ─────────────────────────────────────────────────────────────────

def _action_set(actions: frozenset[str]) -> str:
    return ",".join(sorted(actions))


def _fmt(term: Term, ctx: str) -> str:
    if isinstance(term, Nil):
        return "0"
    if isinstance(term, Const):
        return term.name
    if isinstance(term, Prefix):
        return f"{term.activity}.{_fmt(term.body, 'prefix')}"
    if isinstance(term, Choice):
        text = f"{_fmt(term.left, 'choice-left')} + {_fmt(term.right, 'choice-right')}"
        return f"({text})" if ctx in ("prefix", "choice-right", "hide") else text
    if isinstance(term, Hide):
        text = f"{_fmt(term.body, 'hide')}/{{{_action_set(term.actions)}}}"
        return f"({text})" if ctx in ("prefix", "choice-left", "choice-right") else text
    if isinstance(term, Coop):
        text = f"{_fmt(term.left, 'coop-left')} <{_action_set(term.actions)}> {_fmt(term.right, 'coop-right')}"
        return text if ctx in ("top", "coop-left") else f"({text})"
    raise TypeError(f"not a term: {term!r}")


def format_term(term: Term) -> str:
    """Concrete syntax of a term with minimal parentheses."""
    return _fmt(term, "top")
