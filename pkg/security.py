"""
security.py
───────────
Exact persistent stochastic non-interference (EPSNI) and its relatives.

  check_epsni             P∖H ≈ᴴ P on the joint graph, with a certificate
  check_esni_with         (P∖H) ≈we ((P ⋈_H Π)/H) for one high environment Π
  check_epsni_definition  every derivative of P against a battery of Π
  check_psni_with         the same battery test under exact lumpability
  check_unwinding         per high edge P' →h P'', the two-sided diagnostic

Battery checks only sample the quantifier over high environments: a pass
is reported with conclusive=False, an empty battery with vacuous=True.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from equivalence import (
    LUMPABLE,
    WEAK_EXACT,
    AnalysisGraph,
    EquivalenceKind,
    EquivalenceVerdict,
    Partition,
    Violation,
    equivalent,
    partition_to_json,
    violation_to_json,
)
from pepa_model import (
    NIL,
    TAU,
    Const,
    Coop,
    Hide,
    InvalidEnvironmentError,
    ModelEnv,
    NotHighComponentError,
    PepaError,
    Rate,
    Term,
    format_term,
    prefix,
    validate,
)
from semantics import derive

logger = logging.getLogger(__name__)


# ── constructions ─────────────────────────────────────────────────────────────

def hide(term: Term, actions: Iterable[str]) -> Hide:
    return Hide(term, frozenset(actions))


def restrict(term: Term, actions: Iterable[str]) -> Hide:
    """P∖A as (P ⋈_A 0)/A."""
    actions = frozenset(actions)
    return Hide(Coop(term, actions, NIL), actions)


def restrict_high(env: ModelEnv, term: Term | None = None) -> Hide:
    return restrict(env.root if term is None else term, env.high)


def _require_high_set(env: ModelEnv) -> None:
    if TAU in env.high:
        raise PepaError("tau cannot be a high action")


@dataclass(frozen=True)
class HighEnvironment:
    """A candidate Π: its definitions and the term that starts it."""

    env: ModelEnv
    term: Term
    label: str = ""

    @classmethod
    def nil(cls) -> HighEnvironment:
        return cls(ModelEnv({}, NIL), NIL, "0")

    @classmethod
    def from_constant(cls, env: ModelEnv, name: str) -> HighEnvironment:
        env.body(name)
        return cls(env.with_root(Const(name)), Const(name), name)

    @property
    def name(self) -> str:
        return self.label or format_term(self.term)


def is_high_component(env: ModelEnv, term: Term, high: Iterable[str] | None = None) -> bool:
    """Every state reachable from term enables only high activities."""
    high = env.high if high is None else frozenset(high)
    graph = derive(env, term)
    return all(e.action in high for e in graph.edges)


def default_battery(env: ModelEnv) -> list[HighEnvironment]:
    """0 plus, for each high action h, one-state loops on (h,T), (h,1) and (h,2)."""
    battery = [HighEnvironment.nil()]
    defs = {}
    members: list[tuple[str, Term]] = []
    for h in sorted(env.high):
        for tag, rate in (("T", Rate.top()), ("1", Rate.active(1)), ("2", Rate.active(2))):
            name = f"High{tag}_{h}"
            defs[name] = prefix(h, rate, Const(name))
            members.append((name, Const(name)))
    battery_env = ModelEnv(defs, NIL, env.high)
    battery.extend(HighEnvironment(battery_env, term, name) for name, term in members)
    return battery


# ── verdicts ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Failure:
    derivative: str | None
    environment: str | None
    violation: Violation | None
    detail: str


@dataclass(frozen=True)
class SecurityVerdict:
    secure: bool
    method: str
    high: frozenset[str] = frozenset()
    failing: Failure | None = None
    certificate: Partition | None = None
    conclusive: bool = True
    vacuous: bool = False
    graph: AnalysisGraph | None = field(default=None, compare=False, repr=False)

    def __bool__(self) -> bool:
        return self.secure


def _separated_high_edge(verdict: EquivalenceVerdict, high: frozenset[str]) -> str | None:
    """First high edge of the right-hand graph whose endpoints the certificate separates."""
    graph = verdict.graph
    k = len(graph.graphs) - 1
    derivation, offset = graph.graphs[k], graph.offsets[k]
    for e in derivation.edges:
        if e.action in high and not verdict.certificate.same_block(e.src + offset, e.dst + offset):
            return derivation.label(e.src)
    return None


def check_epsni(env: ModelEnv) -> SecurityVerdict:
    """Decide EPSNI for the system of env through P∖H ≈ᴴ P."""
    _require_high_set(env)
    system = env.root
    verdict = equivalent(env, restrict_high(env), env, system, EquivalenceKind.up_to_h(env.high))
    if verdict.related:
        logger.info("secure: %s", format_term(system))
        return SecurityVerdict(True, "corollary", env.high, certificate=verdict.certificate, graph=verdict.graph)
    derivative = _separated_high_edge(verdict, env.high) or format_term(system)
    failure = Failure(
        derivative,
        None,
        verdict.witness,
        f"a high activity from {derivative} leads to a state the low view can tell apart",
    )
    logger.info("insecure: %s", failure.detail)
    return SecurityVerdict(False, "corollary", env.high, failure, verdict.certificate, graph=verdict.graph)


@dataclass(frozen=True)
class EsniResult:
    holds: bool
    certificate: Partition
    witness: Violation | None
    graph: AnalysisGraph = field(compare=False, repr=False)

    def __bool__(self) -> bool:
        return self.holds


def _prepare(env: ModelEnv, environment: HighEnvironment) -> ModelEnv:
    diagnostics = validate(environment.env.with_root(environment.term).with_high(env.high))
    if diagnostics:
        raise InvalidEnvironmentError(environment.name, diagnostics)
    combined = environment.env.merged(env).with_root(env.root).with_high(env.high)
    if not is_high_component(combined, environment.term, env.high):
        raise NotHighComponentError(
            f"high environment {environment.name} enables activities outside the high set "
            f"{{{', '.join(sorted(env.high))}}}"
        )
    return combined


def check_esni_with(
    env: ModelEnv,
    term: Term,
    environment: HighEnvironment,
    kind: EquivalenceKind = WEAK_EXACT,
) -> EsniResult:
    """(term∖H) ~ ((term ⋈_H Π)/H) on their joint graph."""
    _require_high_set(env)
    combined = _prepare(env, environment)
    low_view = restrict(term, env.high)
    composed = hide(Coop(term, env.high, environment.term), env.high)
    verdict = equivalent(combined, low_view, combined, composed, kind)
    return EsniResult(verdict.related, verdict.certificate, verdict.witness, verdict.graph)


def _battery_check(
    env: ModelEnv,
    term: Term | None,
    battery: Sequence[HighEnvironment],
    kind: EquivalenceKind,
    method: str,
) -> SecurityVerdict:
    _require_high_set(env)
    system = env.root if term is None else term
    if not battery:
        logger.warning("empty high-environment battery: %s holds vacuously", method)
        return SecurityVerdict(True, method, env.high, conclusive=False, vacuous=True)
    for environment in battery:
        _prepare(env, environment)
    derivatives = derive(env, system).states
    for state in derivatives:
        for environment in battery:
            result = check_esni_with(env, state, environment, kind)
            if not result.holds:
                failure = Failure(
                    format_term(state),
                    environment.name,
                    result.witness,
                    f"composing {format_term(state)} with {environment.name} changes its low view",
                )
                logger.info("insecure: %s", failure.detail)
                return SecurityVerdict(
                    False, method, env.high, failure, result.certificate, graph=result.graph
                )
    logger.info(
        "%d derivatives pass against %d high environments (%s)", len(derivatives), len(battery), method
    )
    return SecurityVerdict(True, method, env.high, conclusive=False)


def check_epsni_definition(env: ModelEnv, battery: Sequence[HighEnvironment], *, term: Term | None = None) -> SecurityVerdict:
    """Every derivative P' of P against every Π in battery, under weak-exact equivalence."""
    return _battery_check(env, term, battery, WEAK_EXACT, "definition")


def check_psni_with(env: ModelEnv, term: Term | None, battery: Sequence[HighEnvironment]) -> SecurityVerdict:
    """The battery test with exact lumpability in place of weak-exact equivalence."""
    return _battery_check(env, term, battery, LUMPABLE, "psni")


# ── unwinding ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class UnwindingEdge:
    source: str
    action: str
    target: str
    high_equivalent: EquivalenceVerdict
    restricted_equivalent: EquivalenceVerdict

    @property
    def holds(self) -> bool:
        return self.high_equivalent.related and self.restricted_equivalent.related


@dataclass(frozen=True)
class UnwindingReport:
    high: frozenset[str]
    edges: tuple[UnwindingEdge, ...]

    @property
    def passed(self) -> bool:
        return all(e.holds for e in self.edges)

    @property
    def vacuous(self) -> bool:
        return not self.edges

    def __bool__(self) -> bool:
        return self.passed


def check_unwinding(env: ModelEnv) -> UnwindingReport:
    """For every high edge P' →h P'': P' ≈ᴴ P'' and P'∖H ≈we P''∖H."""
    _require_high_set(env)
    graph = derive(env)
    kind = EquivalenceKind.up_to_h(env.high)
    seen: set[tuple[int, str, int]] = set()
    cache: dict[tuple[int, int], tuple[EquivalenceVerdict, EquivalenceVerdict]] = {}
    rows = []
    for e in graph.edges:
        if e.action not in env.high or (e.src, e.action, e.dst) in seen:
            continue
        seen.add((e.src, e.action, e.dst))
        pair = (e.src, e.dst)
        if pair not in cache:
            src, dst = graph.states[e.src], graph.states[e.dst]
            cache[pair] = (
                equivalent(env, src, env, dst, kind),
                equivalent(env, restrict_high(env, src), env, restrict_high(env, dst), WEAK_EXACT),
            )
        high_eq, restricted_eq = cache[pair]
        rows.append(UnwindingEdge(graph.label(e.src), e.action, graph.label(e.dst), high_eq, restricted_eq))
    return UnwindingReport(env.high, tuple(rows))


# ── export ────────────────────────────────────────────────────────────────────

def verdict_to_json(verdict: SecurityVerdict) -> dict:
    failing = verdict.failing
    witness = None
    if failing is not None and failing.violation is not None and verdict.graph is not None:
        witness = violation_to_json(verdict.graph, failing.violation)
    certificate = None
    if verdict.certificate is not None and verdict.graph is not None:
        certificate = partition_to_json(verdict.graph, verdict.certificate)
    return {
        "secure": verdict.secure,
        "method": verdict.method,
        "high": sorted(verdict.high),
        "conclusive": verdict.conclusive,
        "vacuous": verdict.vacuous,
        "failing": None if failing is None else {
            "derivative": failing.derivative,
            "environment": failing.environment,
            "detail": failing.detail,
        },
        "witness": witness,
        "certificate": certificate,
    }


def unwinding_to_json(report: UnwindingReport) -> dict:
    def witness(verdict: EquivalenceVerdict) -> dict | None:
        return None if verdict.witness is None else violation_to_json(verdict.graph, verdict.witness)

    return {
        "high": sorted(report.high),
        "passed": report.passed,
        "vacuous": report.vacuous,
        "edges": [
            {
                "source": e.source,
                "action": e.action,
                "target": e.target,
                "highEquivalent": e.high_equivalent.related,
                "restrictedEquivalent": e.restricted_equivalent.related,
                "witness": witness(e.high_equivalent) or witness(e.restricted_equivalent),
            }
            for e in report.edges
        ],
    }
