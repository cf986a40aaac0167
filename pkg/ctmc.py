"""
ctmc.py
───────
From a complete derivation graph to its continuous-time Markov chain:
per-action rate queries, the infinitesimal generator, irreducibility and
the steady-state distribution.

Two solvers:
  exact   fraction-free Gaussian elimination over integers, Fraction result
  float   numpy.linalg.solve, accepted only when |ΠQ| stays under
          EPSNI_FLOAT_TOLERANCE
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np

import config
from pepa_model import PepaError, ReducibleChainError, fraction_text
from semantics import DerivationGraph, require_complete

logger = logging.getLogger(__name__)

SOLVERS = ("exact", "float")

Rates = dict[str, dict[int, Fraction]]


# ── rate table ────────────────────────────────────────────────────────────────

class RateTable:
    """Multiplicity-weighted active rates indexed by source and by target.

    out[i][α][j] and inc[j][α][i] both hold the total α rate from i to j,
    self-loops included.
    """

    def __init__(self, n: int) -> None:
        self.n = n
        self.out: list[Rates] = [{} for _ in range(n)]
        self.inc: list[Rates] = [{} for _ in range(n)]
        self.out_total: list[dict[str, Fraction]] = [{} for _ in range(n)]

    def add(self, src: int, action: str, dst: int, rate: Fraction) -> None:
        row = self.out[src].setdefault(action, {})
        row[dst] = row.get(dst, Fraction(0)) + rate
        col = self.inc[dst].setdefault(action, {})
        col[src] = col.get(src, Fraction(0)) + rate
        totals = self.out_total[src]
        totals[action] = totals.get(action, Fraction(0)) + rate

    @classmethod
    def from_graph(cls, graph: DerivationGraph) -> RateTable:
        require_complete(graph)
        table = cls(len(graph))
        for e in graph.edges:
            table.add(e.src, e.action, e.dst, e.total.value)
        return table

    @classmethod
    def disjoint_union(cls, tables: Iterable[RateTable]) -> RateTable:
        tables = list(tables)
        union = cls(sum(t.n for t in tables))
        offset = 0
        for t in tables:
            for i, by_action in enumerate(t.out):
                for action, targets in by_action.items():
                    for j, rate in targets.items():
                        union.add(i + offset, action, j + offset, rate)
            offset += t.n
        return union


def rate_table(graph: DerivationGraph) -> RateTable:
    table = graph.memo.get("rates")
    if table is None:
        table = graph.memo["rates"] = RateTable.from_graph(graph)
    return table


def _table(source: DerivationGraph | RateTable) -> RateTable:
    return source if isinstance(source, RateTable) else rate_table(source)


# ── rate queries ──────────────────────────────────────────────────────────────

def q(source: DerivationGraph | RateTable, i: int, j: int) -> Fraction:
    """Total rate i → j over every action; 0 on the diagonal."""
    table = _table(source)
    if i == j:
        return Fraction(0)
    return sum((targets.get(j, Fraction(0)) for targets in table.out[i].values()), Fraction(0))


def q_action(source: DerivationGraph | RateTable, i: int, j: int, action: str) -> Fraction:
    """α rate i → j; self-loops count."""
    return _table(source).out[i].get(action, {}).get(j, Fraction(0))


def q_out(source: DerivationGraph | RateTable, i: int, action: str) -> Fraction:
    return _table(source).out_total[i].get(action, Fraction(0))


def q_to_block(source: DerivationGraph | RateTable, i: int, block: Iterable[int], action: str) -> Fraction:
    targets = _table(source).out[i].get(action, {})
    return sum((targets.get(j, Fraction(0)) for j in block), Fraction(0))


def q_from_block(source: DerivationGraph | RateTable, block: Iterable[int], i: int, action: str) -> Fraction:
    sources = _table(source).inc[i].get(action, {})
    return sum((sources.get(j, Fraction(0)) for j in block), Fraction(0))


RATE_QUERIES: dict[str, Callable[..., Fraction]] = {
    "q": q,
    "q_action": q_action,
    "q_out": q_out,
    "q_to_block": q_to_block,
    "q_from_block": q_from_block,
}


def rate_query(source: DerivationGraph | RateTable, kind: str, *args) -> Fraction:
    try:
        query = RATE_QUERIES[kind]
    except KeyError:
        raise PepaError(f"unknown rate query {kind!r}; expected one of {sorted(RATE_QUERIES)}") from None
    return query(source, *args)


# ── generator and steady state ────────────────────────────────────────────────

@dataclass(frozen=True)
class Generator:
    entries: tuple[tuple[Fraction, ...], ...]

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.entries[i][j]

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries], dtype=float)


@dataclass(frozen=True)
class SteadyState:
    probabilities: tuple[Fraction | float, ...]
    method: str

    def __getitem__(self, i: int) -> Fraction | float:
        return self.probabilities[i]

    def __len__(self) -> int:
        return len(self.probabilities)

    @property
    def exact(self) -> bool:
        return self.method == "exact"


def generator(graph: DerivationGraph) -> Generator:
    """Q with Q[i][j] = q(i, j) off the diagonal and rows summing to 0."""
    table = rate_table(graph)
    n = table.n
    rows = []
    for i in range(n):
        row = [Fraction(0)] * n
        for targets in table.out[i].values():
            for j, rate in targets.items():
                if j != i:
                    row[j] += rate
        row[i] = -sum(row, Fraction(0))
        rows.append(tuple(row))
    return Generator(tuple(rows))


def _strong_graph(graph: DerivationGraph) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(len(graph)))
    g.add_edges_from((e.src, e.dst) for e in graph.edges)
    return g


def is_irreducible(graph: DerivationGraph) -> bool:
    return len(graph) > 0 and nx.is_strongly_connected(_strong_graph(graph))


def closed_classes(graph: DerivationGraph) -> list[list[int]]:
    """Strongly connected components with no exit, each sorted, least member first."""
    g = _strong_graph(graph)
    condensed = nx.condensation(g)
    closed = [
        sorted(condensed.nodes[c]["members"])
        for c in condensed.nodes
        if condensed.out_degree(c) == 0
    ]
    return sorted(closed)


def _reducible_message(graph: DerivationGraph) -> str:
    closed = closed_classes(graph)
    first = closed[0]
    labels = ", ".join(graph.label(i) for i in first)
    members = set(first)
    outside = ", ".join(graph.label(i) for i in range(len(graph)) if i not in members)
    if len(first) == 1 and not graph.out_edges(first[0]):
        head = f"chain is reducible: state {labels} is absorbing"
    else:
        head = f"chain is reducible: states {{{labels}}} form a closed class"
    return f"{head}; it cannot reach {outside}"


def _solve_exact(gen: Generator) -> tuple[Fraction, ...]:
    n = gen.n
    # Qᵀ with its last row replaced by ones, augmented with e_n
    rows = [[gen.entries[j][i] for j in range(n)] + [Fraction(0)] for i in range(n)]
    rows[-1] = [Fraction(1)] * n + [Fraction(1)]
    m = []
    for row in rows:
        scale = lcm(*(x.denominator for x in row))
        m.append([int(x * scale) for x in row])

    prev = 1
    for k in range(n):
        pivot = next((r for r in range(k, n) if m[r][k] != 0), None)
        if pivot is None:
            raise PepaError("generator is singular")
        m[k], m[pivot] = m[pivot], m[k]
        for i in range(k + 1, n):
            for j in range(k + 1, n + 1):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]

    x = [Fraction(0)] * n
    for i in reversed(range(n)):
        acc = Fraction(m[i][n]) - sum((m[i][j] * x[j] for j in range(i + 1, n)), Fraction(0))
        x[i] = acc / m[i][i]
    return tuple(x)


def _solve_float(gen: Generator) -> tuple[float, ...]:
    q_matrix = gen.as_array()
    a = q_matrix.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(gen.n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    residual = float(np.max(np.abs(pi @ q_matrix))) if gen.n else 0.0
    if residual > config.FLOAT_TOLERANCE:
        raise PepaError(
            f"float solve residual {residual:.3e} exceeds EPSNI_FLOAT_TOLERANCE={config.FLOAT_TOLERANCE:g}; "
            f"use the exact solver"
        )
    return tuple(float(p) for p in pi)


def steady_state(gen: Generator, graph: DerivationGraph, *, method: str | None = None) -> SteadyState:
    """Unique Π with ΠQ = 0 and ΣΠ = 1 for an irreducible finite chain."""
    method = method or config.SOLVER
    if method not in SOLVERS:
        raise PepaError(f"unknown solver {method!r}; expected one of {SOLVERS}")
    if not is_irreducible(graph):
        raise ReducibleChainError(_reducible_message(graph))
    if method == "exact":
        probabilities = _solve_exact(gen)
    else:
        probabilities = _solve_float(gen)
    logger.debug("solved %d-state chain with the %s solver", gen.n, method)
    return SteadyState(probabilities, method)


# ── lumping ───────────────────────────────────────────────────────────────────

def block_probabilities(steady: SteadyState, blocks: Sequence[Sequence[int]]) -> list[Fraction | float]:
    return [sum((steady[i] for i in block), Fraction(0) if steady.exact else 0.0) for block in blocks]


def _same(a: Fraction | float, b: Fraction | float, exact: bool) -> bool:
    if exact:
        return a == b
    return abs(a - b) <= 1e-10 * max(1.0, abs(a), abs(b))


def unequal_blocks(steady: SteadyState, blocks: Sequence[Sequence[int]]) -> list[int]:
    """Indices of blocks whose members do not share one steady-state probability."""
    return [
        k
        for k, block in enumerate(blocks)
        if not all(_same(steady[block[0]], steady[i], steady.exact) for i in block[1:])
    ]


def equiprobable_blocks(steady: SteadyState, blocks: Sequence[Sequence[int]]) -> bool:
    return not unequal_blocks(steady, blocks)


# ── export ────────────────────────────────────────────────────────────────────

def probability_text(p: Fraction | float) -> str | float:
    return fraction_text(p) if isinstance(p, Fraction) else p


def ctmc_to_json(graph: DerivationGraph, gen: Generator, steady: SteadyState | None = None) -> dict:
    return {
        "states": [graph.label(i) for i in range(len(graph))],
        "generator": [[fraction_text(x) for x in row] for row in gen.entries],
        "steadyState": None if steady is None else [probability_text(p) for p in steady.probabilities],
        "solver": None if steady is None else steady.method,
    }

