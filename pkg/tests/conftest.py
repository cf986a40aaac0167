"""Shared model text, loaders and random-model strategies."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from equivalence import EXACT, WEAK_EXACT, AnalysisGraph, coarsest
from oracle import GeneratorParams, random_model, tau_padded, variant
from pepa_model import Coop, ModelEnv, OracleLimitError, Term
from pepa_parser import parse_file, parse_model
from semantics import derive

MODELS = Path(__file__).resolve().parent.parent / "models"

PROPERTY_SETTINGS = settings(
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)

TWO_STATE = "X = (a,1).Y; Y = (b,2).X; system X;"
DOUBLE_LOOP = "Z = (a,1).Z + (a,1).Z; system Z;"
TAU_PAIR = "X = (tau,5).X; Y = (tau,7).Y; system X <> Y;"
LEAK = """
P  = (h,1).PL + (l,1).P;
PL = (l,5).PL;
high {h};
system P;
"""


def model(text: str) -> ModelEnv:
    return parse_model(text)


def load(name: str) -> ModelEnv:
    return parse_file(MODELS / name)


def analysis(env: ModelEnv, term: Term | None = None) -> AnalysisGraph:
    return AnalysisGraph(derive(env, term))


def pair(env: ModelEnv, left: Term, right: Term) -> AnalysisGraph:
    return AnalysisGraph(derive(env, left), derive(env, right))


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@st.composite
def random_models(draw: st.DrawFn, max_states: int = 6, **overrides) -> ModelEnv:
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_model(GeneratorParams(seed=seed, max_states=max_states, **overrides))


def seeded_model(seed: int, max_states: int = 6, **overrides) -> ModelEnv:
    """random_model for seed, stepping to a nearby seed when the generator gives up."""
    for step in range(8):
        try:
            return random_model(GeneratorParams(seed=seed + step * 100_003, max_states=max_states, **overrides))
        except OracleLimitError:
            continue
    raise OracleLimitError(f"no model near seed {seed}")


def disjoint_product(left: ModelEnv, right: ModelEnv, seed: int = 0) -> tuple[ModelEnv, Term]:
    """left ⋈∅ right over one environment, right's constants renamed apart."""
    copy = variant(right, seed)
    return left.merged(copy), Coop(left.root, frozenset(), copy.root)


def weak_exact_pairs(count: int, max_states: int = 5) -> list[tuple[ModelEnv, Term, Term]]:
    """Root pairs related by coarsest(weak-exact) but split by coarsest(exact)."""
    pairs = []
    seed = 0
    while len(pairs) < count:
        env = seeded_model(seed, max_states)
        padded = tau_padded(env, seed)
        graph = AnalysisGraph(derive(env), derive(padded))
        left, right = graph.roots
        if coarsest(graph, WEAK_EXACT).same_block(left, right) and not coarsest(graph, EXACT).same_block(left, right):
            pairs.append((env.merged(padded), env.root, padded.root))
        seed += 1
    return pairs
