#!/usr/bin/env python3
"""
survey_properties.py — Run the security and equivalence properties over
unrestricted random pools and report how often each one holds.

Findings only: nothing here is part of the test gate. Counterexamples are
printed as model text plus the separating clause so they can be promoted
into models/ as regressions.

Usage:
    python scripts/survey_properties.py [--seeds 200] [--max-states 5] [--only NAME]

Reads EPSNI_* env vars through config.py (EPSNI_LOG_LEVEL for -v style
output).
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import config  # noqa: E402
from equivalence import EXACT, WEAK_EXACT, AnalysisGraph, EquivalenceKind, coarsest, equivalent  # noqa: E402
from oracle import GeneratorParams, largest_by_enumeration, random_high_environment, random_model  # noqa: E402
from pepa_model import Activity, Const, ModelEnv, OracleLimitError, PepaError, Prefix, Rate  # noqa: E402
from pepa_parser import render  # noqa: E402
from reporting import table  # noqa: E402
from security import check_epsni, check_epsni_definition, check_unwinding, hide, restrict  # noqa: E402
from semantics import derive  # noqa: E402

LOW_ACTIONS = ("a", "b")


@dataclass
class Tally:
    name: str
    checked: int = 0
    held: int = 0
    examples: list[str] = field(default_factory=list)

    def record(self, ok: bool, example: Callable[[], str], keep: int) -> None:
        self.checked += 1
        if ok:
            self.held += 1
        elif len(self.examples) < keep:
            self.examples.append(example())


def _models(args: argparse.Namespace) -> list[ModelEnv]:
    pool = []
    for seed in range(args.seeds):
        try:
            pool.append(random_model(GeneratorParams(seed=seed, max_states=args.max_states)))
        except OracleLimitError:
            continue
    return pool


def _low_set(rng: random.Random) -> frozenset[str]:
    return frozenset(a for a in LOW_ACTIONS if rng.random() < 0.5)


# ── surveys ───────────────────────────────────────────────────────────────────

def survey_battery(pool: list[ModelEnv], args: argparse.Namespace) -> Tally:
    """Secure by the decision procedure, then against multi-state high environments."""
    tally = Tally("decision vs multi-state battery")
    rng = random.Random(args.rng_seed)
    for env in pool:
        if not check_epsni(env):
            continue
        battery = [random_high_environment(("h",), rng, tag=str(k)) for k in range(args.battery)]
        verdict = check_epsni_definition(env, battery)
        tally.record(
            verdict.secure,
            lambda: f"{render(env)}  derivative {verdict.failing.derivative} "
            f"against {verdict.failing.environment}: {verdict.failing.violation}",
            args.keep,
        )
    return tally


def survey_first(pool: list[ModelEnv], args: argparse.Namespace) -> Tally:
    """Weak-exact related roots of distinct models share their security verdict."""
    tally = Tally("equivalent models share verdicts")
    for left, right in zip(pool, pool[1:]):
        if not equivalent(left, left.root, right, right.root, WEAK_EXACT):
            continue
        tally.record(
            check_epsni(left).secure == check_epsni(right).secure,
            lambda: f"{render(left)}---\n{render(right)}",
            args.keep,
        )
    return tally


def survey_weak_pairs(pool: list[ModelEnv], args: argparse.Namespace) -> Tally:
    """States one model relates by weak-exact but not exact keep the relation under low restriction."""
    tally = Tally("weak-exact pairs survive low restriction")
    rng = random.Random(args.rng_seed)
    for env in pool:
        graph = derive(env)
        joint = AnalysisGraph(graph)
        weak, exact = coarsest(joint, WEAK_EXACT), coarsest(joint, EXACT)
        for block in weak.blocks:
            for i, j in zip(block, block[1:]):
                if exact.same_block(i, j):
                    continue
                left, right = graph.states[i], graph.states[j]
                low = _low_set(rng)
                tally.record(
                    equivalent(env, restrict(left, low), env, restrict(right, low), WEAK_EXACT).related,
                    lambda: f"{render(env)}  {graph.label(i)} vs {graph.label(j)} restricted by {{{', '.join(sorted(low))}}}",
                    args.keep,
                )
    return tally


def survey_preservation(pool: list[ModelEnv], args: argparse.Namespace) -> Tally:
    """Secure models stay secure after hiding or restricting low actions."""
    tally = Tally("low hiding and restriction preserve security")
    rng = random.Random(args.rng_seed)
    for env in pool:
        if not check_epsni(env):
            continue
        for _ in range(args.low_sets):
            low = _low_set(rng)
            for build in (hide, restrict):
                changed = env.with_root(build(env.root, low))
                tally.record(
                    check_epsni(changed).secure,
                    lambda: f"{render(env)}  {build.__name__} {{{', '.join(sorted(low))}}}",
                    args.keep,
                )
    return tally


def survey_unwinding(pool: list[ModelEnv], args: argparse.Namespace) -> Tally:
    """Every secure model passes the unwinding diagnostic."""
    tally = Tally("secure models pass unwinding")
    for env in pool:
        if not check_epsni(env):
            continue
        report = check_unwinding(env)
        failed = [e for e in report.edges if not e.holds]
        tally.record(
            report.passed,
            lambda: f"{render(env)}  edge {failed[0].source} -{failed[0].action}-> {failed[0].target}",
            args.keep,
        )
    return tally


def survey_prefix(pool: list[ModelEnv], args: argparse.Namespace) -> Tally:
    """Related constants stay related under a common prefix (oracle-checked)."""
    tally = Tally("prefix keeps related pairs related")
    up_to = EquivalenceKind.up_to_h(["h"])
    for env in pool:
        names = sorted(env.defs)
        for i, p in enumerate(names):
            for q in names[i + 1:]:
                if not equivalent(env, Const(p), env, Const(q), WEAK_EXACT):
                    continue
                act = Activity("b", Rate.active(1))
                for kind in (WEAK_EXACT, up_to):
                    pp, pq = Prefix(act, Const(p)), Prefix(act, Const(q))
                    graph = AnalysisGraph(derive(env, pp), derive(env, pq))
                    refined = coarsest(graph, kind)
                    if graph.n <= config.ORACLE_MAX_STATES and refined != largest_by_enumeration(graph, kind):
                        print(f"❌ oracle disagrees on {p} vs {q} ({kind})", file=sys.stderr)
                    a, b = graph.roots
                    tally.record(refined.same_block(a, b), lambda: f"{render(env)}  {p} vs {q} ({kind})", args.keep)
    return tally


SURVEYS: dict[str, Callable[[list[ModelEnv], argparse.Namespace], Tally]] = {
    "battery": survey_battery,
    "first": survey_first,
    "weak-pairs": survey_weak_pairs,
    "preservation": survey_preservation,
    "unwinding": survey_unwinding,
    "prefix": survey_prefix,
}


def main() -> None:
    parser = argparse.ArgumentParser(description="Survey security properties over random PEPA models.")
    parser.add_argument("--seeds", type=int, default=200, help="Random models per pool (default 200).")
    parser.add_argument("--max-states", type=int, default=5, help="State cap per model (default 5).")
    parser.add_argument("--battery", type=int, default=4, help="High environments per model (default 4).")
    parser.add_argument("--low-sets", type=int, default=5, help="Low sets per secure model (default 5).")
    parser.add_argument("--keep", type=int, default=3, help="Counterexamples printed per survey (default 3).")
    parser.add_argument("--rng-seed", type=int, default=0)
    parser.add_argument("--only", choices=sorted(SURVEYS), action="append", help="Run only these surveys.")
    args = parser.parse_args()
    logging.basicConfig(format="[survey] %(levelname)s %(message)s", stream=sys.stderr, level=config.LOG_LEVEL)

    pool = _models(args)
    print(f"\n{'=' * 60}")
    print(f"  Property survey: {len(pool)} random models, at most {args.max_states} states each")
    print(f"{'=' * 60}\n")

    tallies = []
    for name in args.only or list(SURVEYS):
        try:
            tallies.append(SURVEYS[name](pool, args))
        except PepaError as exc:
            print(f"⚠️  {name} stopped: {exc}", file=sys.stderr)

    rows = [(t.name, t.checked, t.held, t.checked - t.held) for t in tallies]
    print(table(rows, ("property", "checked", "held", "counterexamples")))
    for t in tallies:
        if not t.examples:
            continue
        print(f"\n❌ {t.name}")
        for example in t.examples:
            print(f"{example}\n")


if __name__ == "__main__":
    main()
