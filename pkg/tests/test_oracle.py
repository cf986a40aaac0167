from __future__ import annotations

import random

import pytest
from hypothesis import given

import config
from conftest import PROPERTY_SETTINGS, TWO_STATE, analysis, model, random_models, seeded_model
from ctmc import is_irreducible
from equivalence import EXACT, LUMPABLE, WEAK_EXACT, AnalysisGraph, EquivalenceKind, coarsest, equivalent
from oracle import (
    GeneratorParams,
    bell_number,
    enumerate_partitions,
    largest_by_enumeration,
    random_high_environment,
    random_model,
    tau_padded,
    variant,
)
from pepa_model import TAU, Const, OracleLimitError, PepaError, action_alphabet, validate
from security import is_high_component
from semantics import derive, is_complete

ALL_KINDS = [EXACT, WEAK_EXACT, LUMPABLE, EquivalenceKind.up_to_h(["h"])]


# ── enumeration ───────────────────────────────────────────────────────────────

def test_bell_numbers():
    assert [bell_number(n) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]
    assert bell_number(10) == 115975


def test_restricted_growth_strings():
    assert list(enumerate_partitions(3)) == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (0, 1, 2)]
    assert list(enumerate_partitions(0)) == [()]


@pytest.mark.parametrize("n", range(8))
def test_enumeration_count_is_bell(n):
    assert sum(1 for _ in enumerate_partitions(n)) == bell_number(n)


def test_oracle_state_guard(monkeypatch):
    monkeypatch.setattr(config, "ORACLE_MAX_STATES", 1)
    with pytest.raises(OracleLimitError, match="at most 1 states"):
        largest_by_enumeration(analysis(model(TWO_STATE)), EXACT)


def test_oracle_stats_count_every_partition():
    stats: dict = {}
    graph = analysis(model(TWO_STATE))
    assert largest_by_enumeration(graph, EXACT, stats=stats).blocks == ((0,), (1,))
    assert stats["visited"] == bell_number(2)


# ── agreement ─────────────────────────────────────────────────────────────────

@pytest.mark.slow
@pytest.mark.parametrize("seed", range(200))
def test_refinement_matches_enumeration(seed):
    graph = analysis(seeded_model(seed, max_states=8))
    assert graph.n <= 8
    for kind in ALL_KINDS:
        assert coarsest(graph, kind) == largest_by_enumeration(graph, kind), kind


@pytest.mark.parametrize("seed", range(50))
def test_refinement_matches_enumeration_on_small_models(seed):
    graph = analysis(seeded_model(seed, max_states=5))
    for kind in ALL_KINDS:
        assert coarsest(graph, kind) == largest_by_enumeration(graph, kind), kind


@pytest.mark.parametrize("seed", range(15))
def test_refinement_matches_enumeration_on_pairs(seed):
    env = random_model(GeneratorParams(seed=seed, max_states=3))
    other = random_model(GeneratorParams(seed=seed + 1000, max_states=3))
    graph = AnalysisGraph(derive(env), derive(other))
    for kind in ALL_KINDS:
        assert coarsest(graph, kind) == largest_by_enumeration(graph, kind), kind


# ── random models ─────────────────────────────────────────────────────────────

def test_random_model_is_deterministic():
    params = GeneratorParams(seed=7)
    assert random_model(params) == random_model(params)


def test_single_state_models():
    for seed in range(10):
        env = random_model(GeneratorParams(seed=seed, max_states=1))
        assert len(derive(env)) == 1


@pytest.mark.parametrize(
    "overrides",
    [
        {"max_states": 0},
        {"max_states": 13},
        {"high_actions": (TAU,)},
        {"high_actions": ("k",)},
        {"high_mode": "sometimes"},
        {"action_pool": ("h",)},
        {"rate_choices": ()},
    ],
)
def test_bad_generator_params(overrides):
    with pytest.raises(PepaError):
        GeneratorParams(seed=0, **overrides)


@PROPERTY_SETTINGS
@given(random_models(max_states=8))
def test_random_models_are_complete(env):
    graph = derive(env)
    assert len(graph) <= 8
    assert is_complete(graph).complete


@PROPERTY_SETTINGS
@given(random_models(max_states=6, high_mode="none"))
def test_no_high_mode(env):
    assert "h" not in action_alphabet(env, env.root)


@PROPERTY_SETTINGS
@given(random_models(max_states=6, high_mode="self-loop"))
def test_self_loop_mode(env):
    assert all(e.src == e.dst for e in derive(env).edges if e.action == "h")


@PROPERTY_SETTINGS
@given(random_models(max_states=8, strongly_connected=True))
def test_strongly_connected_mode(env):
    assert is_irreducible(derive(env))


# ── variants and high environments ────────────────────────────────────────────

@PROPERTY_SETTINGS
@given(random_models(max_states=6))
def test_variants_are_exact_equivalent(env):
    copy = variant(env, seed=len(env.defs))
    assert set(copy.defs).isdisjoint(env.defs)
    assert len(derive(copy)) == len(derive(env))
    assert equivalent(env, env.root, copy, copy.root, EXACT)


def test_random_high_environments():
    rng = random.Random(3)
    for _ in range(20):
        environment = random_high_environment(("h", "k"), rng)
        assert is_high_component(environment.env, environment.term, {"h", "k"})
        single = random_high_environment(("h",), rng, single_state=True)
        assert len(derive(single.env, single.term)) == 1
    assert random_high_environment((), rng).name == "0"


@pytest.mark.parametrize("seed", range(10))
def test_random_high_environments_are_valid(seed):
    rng = random.Random(seed)
    for _ in range(50):
        environment = random_high_environment(("h", "k"), rng)
        assert validate(environment.env) == []


@pytest.mark.parametrize("seed", range(20))
def test_tau_padding_is_weak_exact_but_not_exact(seed):
    env = seeded_model(seed)
    padded = tau_padded(env, seed)
    assert set(padded.defs).isdisjoint(env.defs)
    assert validate(padded) == []
    assert all(TAU in action_alphabet(padded, Const(name)) for name in padded.defs)
    assert equivalent(env, env.root, padded, padded.root, WEAK_EXACT)
    assert not equivalent(env, env.root, padded, padded.root, EXACT)
