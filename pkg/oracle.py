"""
oracle.py
─────────
Test-side reference machinery: exhaustive partition enumeration, seeded
random PEPA models, rate-isomorphic variants and random high environments.

The enumeration oracle keeps every partition that passes check_partition
and closes their union; on graphs of at most ORACLE_MAX_STATES states it
must agree with equivalence.coarsest.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import config
from ctmc import is_irreducible
from equivalence import AnalysisGraph, EquivalenceKind, Partition, check_partition
from pepa_model import (
    TAU,
    Activity,
    Choice,
    Const,
    Coop,
    Hide,
    ModelEnv,
    Nil,
    OracleLimitError,
    PepaError,
    Prefix,
    Rate,
    StateSpaceLimitError,
    Term,
    UnionNotClosedError,
    choice,
    validate,
)
from security import HighEnvironment
from semantics import derive, is_complete

logger = logging.getLogger(__name__)

MAX_ATTEMPTS   = 64
HIGH_MODES     = ("any", "none", "self-loop")


# ── enumeration ───────────────────────────────────────────────────────────────

def enumerate_partitions(n: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length n, one per set partition of {0..n-1}."""
    if n == 0:
        yield ()
        return
    labels = [0] * n

    def extend(i: int, top: int) -> Iterator[tuple[int, ...]]:
        if i == n:
            yield tuple(labels)
            return
        for v in range(top + 2):
            labels[i] = v
            yield from extend(i + 1, max(top, v))

    yield from extend(1, 0)


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def largest_by_enumeration(graph: AnalysisGraph, kind: EquivalenceKind, *, stats: dict | None = None) -> Partition:
    """Union of every partition that satisfies kind, closed transitively."""
    n = graph.n
    if n > config.ORACLE_MAX_STATES:
        raise OracleLimitError(
            f"oracle enumerates at most {config.ORACLE_MAX_STATES} states, graph has {n}"
        )
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    visited = kept = 0
    for labels in enumerate_partitions(n):
        visited += 1
        candidate = Partition.from_labels(labels)
        if all(find(x) == find(b[0]) for b in candidate.blocks for x in b[1:]):
            continue
        if check_partition(graph, candidate, kind):
            kept += 1
            for b in candidate.blocks:
                root = find(b[0])
                for x in b[1:]:
                    parent[find(x)] = root

    union = Partition.from_labels([find(i) for i in range(n)])
    if not check_partition(graph, union, kind):
        raise UnionNotClosedError(f"union of {kind} partitions is not itself {kind}")
    if stats is not None:
        stats.update(visited=visited, kept=kept)
    logger.debug("oracle visited %d partitions of %d states, %d widened the union", visited, n, kept)
    return union


# ── random models ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GeneratorParams:
    seed: int
    max_states: int = 6
    action_pool: tuple[str, ...] = ("a", "b", TAU, "h")
    high_actions: tuple[str, ...] = ("h",)
    rate_choices: tuple[Fraction, ...] = (Fraction(1), Fraction(2), Fraction(3), Fraction(1, 2))
    include_passive: bool = False
    high_mode: str = "any"
    strongly_connected: bool = False
    compose: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.max_states <= 12:
            raise PepaError("max_states must be between 1 and 12")
        if not self.action_pool:
            raise PepaError("action pool is empty")
        if TAU in self.high_actions:
            raise PepaError("tau cannot be a high action")
        if not set(self.high_actions) <= set(self.action_pool):
            raise PepaError("high actions must come from the action pool")
        if any(Fraction(r) <= 0 for r in self.rate_choices) or not self.rate_choices:
            raise PepaError("rate choices must be positive")
        if self.high_mode not in HIGH_MODES:
            raise PepaError(f"high_mode must be one of {HIGH_MODES}")
        if not self._low_actions():
            raise PepaError("action pool needs at least one low action")

    def _low_actions(self) -> list[str]:
        return [a for a in self.action_pool if a not in self.high_actions]

    def usable_actions(self) -> list[str]:
        return self._low_actions() if self.high_mode == "none" else list(self.action_pool)


class _ModelBuilder:
    def __init__(self, params: GeneratorParams, rng: random.Random) -> None:
        self.params = params
        self.rng = rng
        self.defs: dict[str, Term] = {}
        self.passive: dict[tuple[str, str], bool] = {}

    def rate(self, name: str, action: str) -> Rate:
        key = (name, action)
        if key not in self.passive:
            self.passive[key] = (
                self.params.include_passive and action != TAU and self.rng.random() < 0.25
            )
        if self.passive[key]:
            return Rate.top(self.rng.choice((1, 2)))
        return Rate.active(self.rng.choice(self.params.rate_choices))

    def component(self, prefix: str, size: int) -> Const:
        params, rng = self.params, self.rng
        names = [f"{prefix}{i}" for i in range(size)]
        low = params._low_actions()
        for i, name in enumerate(names):
            summands: list[Term] = []
            if params.strongly_connected:
                action = rng.choice(low)
                summands.append(Prefix(Activity(action, self.rate(name, action)), Const(names[(i + 1) % size])))
            for _ in range(rng.randint(0 if summands else 1, 2 if summands else 3)):
                action = rng.choice(params.usable_actions())
                if action in params.high_actions and params.high_mode == "self-loop":
                    target = i
                else:
                    target = rng.randrange(size)
                summands.append(Prefix(Activity(action, self.rate(name, action)), Const(names[target])))
            self.defs[name] = choice(*summands)
        return Const(names[0])

    def build(self) -> ModelEnv:
        params, rng = self.params, self.rng
        shape = "single"
        if params.compose and params.max_states >= 2:
            shape = rng.choice(("single", "single", "hide", "coop"))
        if shape == "coop":
            left_size = rng.randint(1, max(1, params.max_states // 2))
            right_size = rng.randint(1, max(1, params.max_states // left_size))
            left = self.component("P", left_size)
            right = self.component("Q", right_size)
            candidates = [a for a in params.usable_actions() if a != TAU]
            sync = frozenset(a for a in candidates if rng.random() < 0.5)
            root: Term = Coop(left, sync, right)
        else:
            root = self.component("S", rng.randint(1, params.max_states))
            if shape == "hide":
                candidates = [a for a in params.usable_actions() if a != TAU]
                hidden = frozenset(a for a in candidates if rng.random() < 0.5)
                if hidden:
                    root = Hide(root, hidden)
        return ModelEnv(self.defs, root, frozenset(params.high_actions))


def _acceptable(env: ModelEnv, params: GeneratorParams) -> bool:
    if validate(env):
        return False
    try:
        graph = derive(env, max_states=params.max_states)
    except StateSpaceLimitError:
        return False
    if not params.include_passive and not is_complete(graph).complete:
        return False
    if params.strongly_connected:
        return is_irreducible(graph)
    return True


def random_model(params: GeneratorParams) -> ModelEnv:
    """Deterministic in params: the same seed always yields the same model."""
    rng = random.Random(params.seed)
    for _ in range(MAX_ATTEMPTS):
        env = _ModelBuilder(params, rng).build()
        if _acceptable(env, params):
            return env
    raise OracleLimitError(f"no acceptable model for seed {params.seed} after {MAX_ATTEMPTS} attempts")


def random_high_environment(
    high: tuple[str, ...] | list[str],
    rng: random.Random,
    *,
    max_states: int = 3,
    single_state: bool = False,
    include_passive: bool = True,
    tag: str = "",
) -> HighEnvironment:
    """A random component over the high actions only."""
    if not high:
        return HighEnvironment.nil()
    size = 1 if single_state else rng.randint(1, max_states)
    names = [f"Env{tag}_{i}" for i in range(size)]
    defs: dict[str, Term] = {}
    for i, name in enumerate(names):
        summands = []
        passive: dict[str, bool] = {}
        for _ in range(rng.randint(1, 2)):
            action = rng.choice(sorted(high))
            if action not in passive:
                passive[action] = include_passive and rng.random() < 0.3
            if passive[action]:
                rate = Rate.top(rng.choice((1, 2)))
            else:
                rate = Rate.active(rng.choice((1, 2, 3)))
            summands.append(Prefix(Activity(action, rate), Const(names[rng.randrange(size)])))
        defs[name] = choice(*summands)
    env = ModelEnv(defs, Const(names[0]), frozenset(high))
    return HighEnvironment(env, Const(names[0]), names[0])


# ── variants ──────────────────────────────────────────────────────────────────

def variant(env: ModelEnv, seed: int) -> ModelEnv:
    """A rate-isomorphic copy: constants renamed, choices permuted, prefixes split."""
    rng = random.Random(seed)
    names = list(env.defs)
    shuffled = names[:]
    rng.shuffle(shuffled)
    rename = {old: f"V{k}{old}" for k, old in enumerate(shuffled)}
    memo: dict[Term, Term] = {}

    def transform(term: Term) -> Term:
        if term in memo:
            return memo[term]
        if isinstance(term, Nil):
            out: Term = term
        elif isinstance(term, Const):
            out = Const(rename.get(term.name, term.name))
        elif isinstance(term, Prefix):
            body = transform(term.body)
            rate = term.activity.rate
            if not rate.passive and rng.random() < 0.5:
                third = rate.value / 3
                out = Choice(
                    Prefix(Activity(term.activity.action, Rate(third)), body),
                    Prefix(Activity(term.activity.action, Rate(rate.value - third)), body),
                )
            else:
                out = Prefix(term.activity, body)
        elif isinstance(term, Choice):
            left, right = transform(term.left), transform(term.right)
            out = Choice(right, left) if rng.random() < 0.5 else Choice(left, right)
        elif isinstance(term, Hide):
            out = Hide(transform(term.body), term.actions)
        elif isinstance(term, Coop):
            out = Coop(transform(term.left), term.actions, transform(term.right))
        else:
            raise TypeError(f"not a term: {term!r}")
        memo[term] = out
        return out

    defs = {rename[name]: transform(env.defs[name]) for name in shuffled}
    return ModelEnv(defs, transform(env.root), env.high)


def tau_padded(env: ModelEnv, seed: int, rates: tuple[int, ...] = (1, 2, 3)) -> ModelEnv:
    """A renamed variant with a τ self-loop added to every constant.

    The loops cancel in every relaxed clause, so the copy stays weak-exact
    related to env while its exact τ exit rates change.
    """
    rng = random.Random(seed)
    copy = variant(env, seed)
    defs = {
        name: Choice(body, Prefix(Activity(TAU, Rate.active(rng.choice(rates))), Const(name)))
        for name, body in copy.defs.items()
    }
    return ModelEnv(defs, copy.root, copy.high)
