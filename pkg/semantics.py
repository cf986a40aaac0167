"""
semantics.py
────────────
Structural operational semantics of PEPA: enabled activities with
multiplicities, apparent rates, the shared-activity rate and breadth-first
construction of the derivation graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import config
from pepa_model import (
    TAU,
    Activity,
    Choice,
    Const,
    Coop,
    Hide,
    IncompleteModelError,
    ModelEnv,
    Nil,
    PepaError,
    Prefix,
    Rate,
    RateError,
    StateSpaceLimitError,
    Term,
    format_term,
    fraction_text,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    activity: Activity
    target: Term
    multiplicity: int = 1


TransitionMultiset = tuple[Transition, ...]


def _merge(entries: Iterable[Transition]) -> TransitionMultiset:
    counts: dict[tuple[Activity, Term], int] = {}
    for t in entries:
        key = (t.activity, t.target)
        counts[key] = counts.get(key, 0) + t.multiplicity
    return tuple(Transition(a, target, m) for (a, target), m in counts.items())


def _sum_rates(entries: Iterable[Transition], action: str) -> Rate | None:
    total: Rate | None = None
    for t in entries:
        if t.activity.action != action:
            continue
        rate = t.activity.rate * t.multiplicity
        total = rate if total is None else total + rate
    return total


def shared_rate(r1: Rate, r2: Rate, ra_p: Rate, ra_q: Rate) -> Rate:
    """(r1/raP)·(r2/raQ)·min(raP, raQ) under ⊤-arithmetic."""
    if r1.passive != ra_p.passive or r2.passive != ra_q.passive:
        raise RateError(
            f"activity rate kind does not match its apparent rate ({r1} vs {ra_p}, {r2} vs {ra_q})"
        )
    bound = min(ra_p, ra_q)
    return Rate(r1.ratio(ra_p) * r2.ratio(ra_q) * bound.value, bound.passive)


class Stepper:
    """Memoised one-step semantics over a fixed environment."""

    def __init__(self, env: ModelEnv) -> None:
        self.env = env
        self._cache: dict[Term, TransitionMultiset] = {}
        self._unfolding: set[str] = set()

    def enabled(self, term: Term) -> TransitionMultiset:
        cached = self._cache.get(term)
        if cached is None:
            cached = self._cache[term] = self._enabled(term)
        return cached

    def _enabled(self, term: Term) -> TransitionMultiset:
        if isinstance(term, Nil):
            return ()
        if isinstance(term, Prefix):
            return (Transition(term.activity, term.body, 1),)
        if isinstance(term, Const):
            if term.name in self._unfolding:
                raise PepaError(f"unguarded recursion through constant {term.name}")
            self._unfolding.add(term.name)
            try:
                return self.enabled(self.env.body(term.name))
            finally:
                self._unfolding.discard(term.name)
        if isinstance(term, Choice):
            return _merge(self.enabled(term.left) + self.enabled(term.right))
        if isinstance(term, Hide):
            hidden = term.actions
            return _merge(
                Transition(
                    Activity(TAU, t.activity.rate) if t.activity.action in hidden else t.activity,
                    Hide(t.target, hidden),
                    t.multiplicity,
                )
                for t in self.enabled(term.body)
            )
        if isinstance(term, Coop):
            return self._cooperate(term)
        raise TypeError(f"not a term: {term!r}")

    def _cooperate(self, term: Coop) -> TransitionMultiset:
        left, right = self.enabled(term.left), self.enabled(term.right)
        sync = term.actions
        out: list[Transition] = []
        apparent: dict[str, tuple[Rate | None, Rate | None]] = {}
        for t in left:
            action = t.activity.action
            if action not in sync:
                out.append(Transition(t.activity, Coop(t.target, sync, term.right), t.multiplicity))
                continue
            if action not in apparent:
                apparent[action] = (_apparent(left, action, term.left), _apparent(right, action, term.right))
            ra_p, ra_q = apparent[action]
            for u in right:
                if u.activity.action != action:
                    continue
                rate = shared_rate(t.activity.rate, u.activity.rate, ra_p, ra_q)
                out.append(
                    Transition(
                        Activity(action, rate),
                        Coop(t.target, sync, u.target),
                        t.multiplicity * u.multiplicity,
                    )
                )
        for u in right:
            if u.activity.action not in sync:
                out.append(Transition(u.activity, Coop(term.left, sync, u.target), u.multiplicity))
        return _merge(out)


def _apparent(entries: TransitionMultiset, action: str, term: Term) -> Rate | None:
    try:
        return _sum_rates(entries, action)
    except RateError:
        raise RateError(
            f"action {action} has both active and passive rates in {format_term(term)}; "
            f"synchronise it with a partner or restrict it"
        ) from None


def enabled(env: ModelEnv, term: Term) -> TransitionMultiset:
    return Stepper(env).enabled(term)


def apparent_rate(env: ModelEnv, term: Term, action: str) -> Rate | None:
    """r_α(term); None when no α activity is enabled."""
    return _apparent(enabled(env, term), action, term)


# ── derivation graph ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Edge:
    src: int
    action: str
    rate: Rate
    dst: int
    multiplicity: int = 1

    @property
    def total(self) -> Rate:
        return self.rate * self.multiplicity


@dataclass(frozen=True)
class CompletenessReport:
    complete: bool
    offenders: tuple[int, ...]
    absorbing: tuple[int, ...]

    def __bool__(self) -> bool:
        return self.complete


@dataclass(frozen=True)
class DerivationGraph:
    """ds(P) in first-discovery order (root at 0) and the edges of 𝒟(P)."""

    states: tuple[Term, ...]
    edges: tuple[Edge, ...]
    env: ModelEnv = field(compare=False, repr=False)
    memo: dict = field(default_factory=dict, init=False, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def root(self) -> Term:
        return self.states[0]

    def index_of(self, term: Term) -> int:
        index = self.memo.get("index")
        if index is None:
            index = self.memo["index"] = {s: i for i, s in enumerate(self.states)}
        return index[term]

    def out_edges(self, i: int) -> list[Edge]:
        out = self.memo.get("out")
        if out is None:
            out = [[] for _ in self.states]
            for e in self.edges:
                out[e.src].append(e)
            self.memo["out"] = out
        return out[i]

    def exit_rate(self, i: int) -> Fraction:
        """q(P_i): multiplicity-weighted sum of every outgoing activity rate."""
        total = Fraction(0)
        for e in self.out_edges(i):
            if e.rate.passive:
                raise IncompleteModelError(
                    f"state {self.label(i)} has passive activity ({e.action},{e.rate})", [self.label(i)]
                )
            total += e.total.value
        return total

    def label(self, i: int) -> str:
        return format_term(self.states[i])

    def actions(self) -> list[str]:
        return sorted({e.action for e in self.edges})


def derive(env: ModelEnv, term: Term | None = None, *, max_states: int | None = None) -> DerivationGraph:
    """Breadth-first closure of enabled() from term (default: the system)."""
    cap = max_states or config.MAX_STATES
    stepper = Stepper(env)
    root = env.root if term is None else term
    states: list[Term] = [root]
    index: dict[Term, int] = {root: 0}
    edges: list[Edge] = []
    head = 0
    while head < len(states):
        for t in stepper.enabled(states[head]):
            j = index.get(t.target)
            if j is None:
                if len(states) >= cap:
                    raise StateSpaceLimitError(
                        f"derivation exceeded {cap} states; raise EPSNI_MAX_STATES or simplify the model"
                    )
                j = index[t.target] = len(states)
                states.append(t.target)
            edges.append(Edge(head, t.activity.action, t.activity.rate, j, t.multiplicity))
        head += 1
    logger.debug("derived %d states and %d edges from %s", len(states), len(edges), format_term(root))
    return DerivationGraph(tuple(states), tuple(edges), env)


def is_complete(graph: DerivationGraph) -> CompletenessReport:
    """Complete iff no passive rate reaches top level; absorbing states are listed apart."""
    offenders = sorted({e.src for e in graph.edges if e.rate.passive})
    absorbing = [i for i in range(len(graph)) if not graph.out_edges(i)]
    return CompletenessReport(not offenders, tuple(offenders), tuple(absorbing))


def require_complete(graph: DerivationGraph) -> None:
    report = is_complete(graph)
    if not report.complete:
        labels = [graph.label(i) for i in report.offenders]
        raise IncompleteModelError(
            f"model is not complete: passive activities reach top level in {', '.join(labels)}", labels
        )


# ── export ────────────────────────────────────────────────────────────────────

def rate_text(rate: Rate) -> str:
    return fraction_text(rate.value) + ("*T" if rate.passive else "")


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def graph_to_dot(graph: DerivationGraph, name: str = "derivation") -> str:
    lines = [f'digraph "{_dot_escape(name)}" {{', "  rankdir=LR;"]
    for i in range(len(graph)):
        shape = "doublecircle" if i == 0 else "ellipse"
        lines.append(f'  s{i} [label="{_dot_escape(graph.label(i))}", shape={shape}];')
    for e in graph.edges:
        label = f"{e.action}, {e.rate} ×{e.multiplicity}"
        lines.append(f'  s{e.src} -> s{e.dst} [label="{_dot_escape(label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: DerivationGraph) -> dict:
    report = is_complete(graph)
    return {
        "states": [{"index": i, "term": graph.label(i)} for i in range(len(graph))],
        "edges": [
            {
                "src": e.src,
                "action": e.action,
                "rate": rate_text(e.rate),
                "dst": e.dst,
                "multiplicity": e.multiplicity,
            }
            for e in graph.edges
        ],
        "complete": report.complete,
        "offenders": list(report.offenders),
        "absorbing": list(report.absorbing),
    }
