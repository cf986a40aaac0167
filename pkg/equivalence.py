"""
equivalence.py
──────────────
Exact equivalence, its weak variant, the variant up to a set of high actions
and strong exact lumpability, all decided by signature-based partition
refinement on the disjoint union of one or more derivation graphs.

Every kind compares two states P, Q of a candidate block through a map of
clauses keyed by (action, clause, block):

  out        q[P,α]                       for α outside the relaxed set R
  in         q[S,P,α] for each block S     (α ∉ R), foreign blocks (α ∈ R)
  in-own     q[own,P,α] − q[P,α]           for α ∈ R
  out-block  q[P,S,α] for each block S     (lumpability; τ skips the own block)

R is ∅ for exact, {τ} for weak-exact and H ∪ {τ} for weak-exact up to H.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

from ctmc import RateTable, rate_table
from pepa_model import TAU, ModelEnv, PepaError, Term, fraction_text
from semantics import DerivationGraph, derive

logger = logging.getLogger(__name__)

KINDS   = ("exact", "weak-exact", "lumpable", "weak-exact-up-to-h")
CLAUSES = ("out", "in", "in-own", "out-block")

_OUT, _IN, _IN_OWN, _OUT_BLOCK = range(4)


# ── kinds ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EquivalenceKind:
    name: str
    high: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.name not in KINDS:
            raise PepaError(f"unknown equivalence kind {self.name!r}; expected one of {KINDS}")
        object.__setattr__(self, "high", frozenset(self.high))
        if TAU in self.high:
            raise PepaError("tau cannot be a high action")
        if self.high and self.name != "weak-exact-up-to-h":
            raise PepaError(f"{self.name} takes no high set")

    @classmethod
    def up_to_h(cls, high: Iterable[str]) -> EquivalenceKind:
        return cls("weak-exact-up-to-h", frozenset(high))

    @classmethod
    def parse(cls, text: str, high: Iterable[str] = ()) -> EquivalenceKind:
        if text == "weak-exact-up-to-h":
            return cls.up_to_h(high)
        return cls(text)

    @property
    def relaxed(self) -> frozenset[str]:
        if self.name == "exact":
            return frozenset()
        if self.name == "weak-exact-up-to-h":
            return self.high | {TAU}
        return frozenset({TAU})

    def __str__(self) -> str:
        if self.name == "weak-exact-up-to-h":
            return f"{self.name} {{{', '.join(sorted(self.high))}}}"
        return self.name


EXACT      = EquivalenceKind("exact")
WEAK_EXACT = EquivalenceKind("weak-exact")
LUMPABLE   = EquivalenceKind("lumpable")


# ── analysis graph and partitions ─────────────────────────────────────────────

class AnalysisGraph:
    """Disjoint union of derivation graphs with global state indices."""

    def __init__(self, *graphs: DerivationGraph, tags: Sequence[str] | None = None) -> None:
        if not graphs:
            raise PepaError("an analysis graph needs at least one derivation graph")
        if tags is None:
            tags = ("model",) if len(graphs) == 1 else tuple(
                ("left", "right")[k] if k < 2 else f"graph{k}" for k in range(len(graphs))
            )
        if len(tags) != len(graphs):
            raise PepaError("one tag per derivation graph")
        self.graphs = graphs
        self.tags = tuple(tags)
        self.offsets: list[int] = []
        offset = 0
        for g in graphs:
            self.offsets.append(offset)
            offset += len(g)
        self.n = offset
        self.rates: RateTable = RateTable.disjoint_union(rate_table(g) for g in graphs)

    @property
    def roots(self) -> tuple[int, ...]:
        return tuple(self.offsets)

    def locate(self, i: int) -> tuple[int, int]:
        """(graph number, local index) of global state i."""
        for k in reversed(range(len(self.graphs))):
            if i >= self.offsets[k]:
                return k, i - self.offsets[k]
        raise IndexError(i)

    def label(self, i: int) -> str:
        k, local = self.locate(i)
        return self.graphs[k].label(local)

    def origin(self, i: int) -> str:
        return self.tags[self.locate(i)[0]]

    def actions(self) -> list[str]:
        return sorted({a for g in self.graphs for a in g.actions()})


@dataclass(frozen=True)
class Partition:
    """Blocks of {0..n-1}; members sorted, blocks ordered by least member."""

    blocks: tuple[tuple[int, ...], ...]
    block_of: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        blocks = sorted(tuple(sorted(b)) for b in self.blocks)
        if any(not b for b in blocks):
            raise PepaError("invalid partition: empty block")
        members = [x for b in blocks for x in b]
        if sorted(members) != list(range(len(members))):
            raise PepaError("invalid partition: blocks must cover 0..n-1 exactly once")
        block_of = [0] * len(members)
        for k, b in enumerate(blocks):
            for x in b:
                block_of[x] = k
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "block_of", tuple(block_of))

    @classmethod
    def from_labels(cls, labels: Sequence[Hashable]) -> Partition:
        groups: dict[Hashable, list[int]] = {}
        for i, label in enumerate(labels):
            groups.setdefault(label, []).append(i)
        return cls(tuple(tuple(g) for g in groups.values()))

    @classmethod
    def one_block(cls, n: int) -> Partition:
        return cls((tuple(range(n)),) if n else ())

    @classmethod
    def identity(cls, n: int) -> Partition:
        return cls(tuple((i,) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.block_of)

    def __len__(self) -> int:
        return len(self.blocks)

    def same_block(self, a: int, b: int) -> bool:
        return self.block_of[a] == self.block_of[b]

    def refines(self, other: Partition) -> bool:
        """Every block of self lies inside one block of other."""
        return self.n == other.n and all(
            all(other.block_of[x] == other.block_of[b[0]] for x in b) for b in self.blocks
        )

    def join(self, other: Partition) -> Partition:
        """Finest partition both refine (transitive closure of the union)."""
        if self.n != other.n:
            raise PepaError("cannot join partitions of different sizes")
        parent = list(range(self.n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for p in (self, other):
            for b in p.blocks:
                root = find(b[0])
                for x in b[1:]:
                    parent[find(x)] = root
        return Partition.from_labels([find(i) for i in range(self.n)])


# ── signatures ────────────────────────────────────────────────────────────────

SignatureKey = tuple[str, int, int]


def _signature(rates: RateTable, block_of: Sequence[int], state: int, kind: EquivalenceKind) -> dict[SignatureKey, Fraction]:
    sig: dict[SignatureKey, Fraction] = {}
    own = block_of[state]

    def bump(key: SignatureKey, amount: Fraction) -> None:
        sig[key] = sig.get(key, Fraction(0)) + amount

    if kind.name == "lumpable":
        for action, targets in rates.out[state].items():
            for dst, rate in targets.items():
                b = block_of[dst]
                if action == TAU and b == own:
                    continue
                bump((action, _OUT_BLOCK, b), rate)
    else:
        relaxed = kind.relaxed
        for action, total in rates.out_total[state].items():
            if action in relaxed:
                bump((action, _IN_OWN, own), -total)
            else:
                bump((action, _OUT, -1), total)
        for action, sources in rates.inc[state].items():
            is_relaxed = action in relaxed
            for src, rate in sources.items():
                b = block_of[src]
                if is_relaxed and b == own:
                    bump((action, _IN_OWN, own), rate)
                else:
                    bump((action, _IN, b), rate)
    return {k: v for k, v in sig.items() if v != 0}


def _canonical(sig: dict[SignatureKey, Fraction]) -> tuple:
    return tuple(sorted(sig.items()))


@dataclass(frozen=True)
class Violation:
    """First clause on which two states of one block disagree."""

    left: int
    right: int
    action: str
    clause: str
    block: int | None
    left_rate: Fraction
    right_rate: Fraction


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    violation: Violation | None = None

    def __bool__(self) -> bool:
        return self.ok


def _first_difference(a: int, b: int, sig_a: dict, sig_b: dict) -> Violation | None:
    for key in sorted(set(sig_a) | set(sig_b)):
        ra, rb = sig_a.get(key, Fraction(0)), sig_b.get(key, Fraction(0))
        if ra != rb:
            action, clause, block = key
            return Violation(a, b, action, CLAUSES[clause], None if clause == _OUT else block, ra, rb)
    return None


def _check_size(graph: AnalysisGraph, partition: Partition) -> None:
    if partition.n != graph.n:
        raise PepaError(f"partition covers {partition.n} states but the graph has {graph.n}")


def check_partition(graph: AnalysisGraph, partition: Partition, kind: EquivalenceKind) -> CheckResult:
    """Does the partition satisfy the kind's clauses?

    On failure the violation names the least block, its least member, the
    least other member that disagrees and the least differing clause.
    """
    _check_size(graph, partition)
    sigs = [_signature(graph.rates, partition.block_of, s, kind) for s in range(graph.n)]
    for block in partition.blocks:
        first = block[0]
        for other in block[1:]:
            if sigs[other] != sigs[first]:
                return CheckResult(False, _first_difference(first, other, sigs[first], sigs[other]))
    return CheckResult(True)


def explain_split(graph: AnalysisGraph, partition: Partition, a: int, b: int, kind: EquivalenceKind) -> Violation | None:
    """Clause separating a and b when their signatures are taken against partition."""
    _check_size(graph, partition)
    sig_a = _signature(graph.rates, partition.block_of, a, kind)
    sig_b = _signature(graph.rates, partition.block_of, b, kind)
    return _first_difference(a, b, sig_a, sig_b)


def _refine_once(graph: AnalysisGraph, partition: Partition, kind: EquivalenceKind) -> Partition:
    blocks: list[list[int]] = []
    for block in partition.blocks:
        groups: dict[tuple, list[int]] = {}
        for s in block:
            groups.setdefault(_canonical(_signature(graph.rates, partition.block_of, s, kind)), []).append(s)
        blocks.extend(groups.values())
    return Partition(tuple(tuple(b) for b in blocks))


def coarsest(
    graph: AnalysisGraph,
    kind: EquivalenceKind,
    initial: Partition | None = None,
    *,
    history: list[Partition] | None = None,
) -> Partition:
    """Largest partition satisfying the kind, refined down from initial (default: one block)."""
    current = initial if initial is not None else Partition.one_block(graph.n)
    _check_size(graph, current)
    if history is not None:
        history.append(current)
    rounds = 0
    while True:
        refined = _refine_once(graph, current, kind)
        rounds += 1
        if len(refined) == len(current):
            break
        current = refined
        if history is not None:
            history.append(current)
    logger.debug("%s refinement: %d states, %d blocks after %d rounds", kind, graph.n, len(current), rounds)
    certified = check_partition(graph, current, kind)
    if not certified:
        raise PepaError(f"refinement fixpoint failed its own check: {certified.violation}")
    return current


@dataclass(frozen=True)
class EquivalenceVerdict:
    related: bool
    certificate: Partition
    witness: Violation | None
    graph: AnalysisGraph = field(compare=False, repr=False)

    def __bool__(self) -> bool:
        return self.related


def equivalent(env_left: ModelEnv, left: Term, env_right: ModelEnv, right: Term, kind: EquivalenceKind) -> EquivalenceVerdict:
    """Decide left ~ right on 𝒟(left) ⊎ 𝒟(right); the witness explains a split."""
    graph = AnalysisGraph(derive(env_left, left), derive(env_right, right))
    history: list[Partition] = []
    partition = coarsest(graph, kind, history=history)
    a, b = graph.roots
    if partition.same_block(a, b):
        return EquivalenceVerdict(True, partition, None, graph)
    last_shared = max(k for k, p in enumerate(history) if p.same_block(a, b))
    witness = explain_split(graph, history[last_shared], a, b, kind)
    return EquivalenceVerdict(False, partition, witness, graph)


def is_up_to_we(graph: AnalysisGraph, rel: Partition, we_base: Partition) -> bool:
    """Weak-exact clauses for rel, with blocks taken from the join of rel and we_base."""
    _check_size(graph, rel)
    _check_size(graph, we_base)
    if not check_partition(graph, we_base, WEAK_EXACT):
        raise PepaError("base partition is not a weak-exact equivalence")
    joined = rel.join(we_base)
    for block in rel.blocks:
        first = _signature(graph.rates, joined.block_of, block[0], WEAK_EXACT)
        for other in block[1:]:
            if _signature(graph.rates, joined.block_of, other, WEAK_EXACT) != first:
                return False
    return True


# ── export ────────────────────────────────────────────────────────────────────

def partition_to_json(graph: AnalysisGraph, partition: Partition) -> dict:
    return {
        "blocks": [
            [{"state": graph.label(i), "origin": graph.origin(i)} for i in block]
            for block in partition.blocks
        ]
    }


def violation_to_json(graph: AnalysisGraph, violation: Violation) -> dict:
    return {
        "state": graph.label(violation.left),
        "other": graph.label(violation.right),
        "action": violation.action,
        "clause": violation.clause,
        "block": violation.block,
        "leftRate": fraction_text(violation.left_rate),
        "rightRate": fraction_text(violation.right_rate),
    }
