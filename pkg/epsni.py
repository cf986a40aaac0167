"""
epsni.py
────────
Command-line front end for the PEPA security checker.

Usage:
  python epsni.py validate MODEL.pepa
  python epsni.py graph    MODEL.pepa [--format human|json|dot]
  python epsni.py ctmc     MODEL.pepa [--steady] [--solver exact|float] [--lump KIND]
  python epsni.py equiv    MODEL.pepa --left X --right Y [--kind KIND]
  python epsni.py epsni    MODEL.pepa [--high h1,h2]
  python epsni.py esni     MODEL.pepa --envs ENVS.pepa [--high h1,h2]
  python epsni.py psni     MODEL.pepa --envs ENVS.pepa [--high h1,h2]
  python epsni.py unwind   MODEL.pepa [--high h1,h2]
  python epsni.py oracle   MODEL.pepa [--kind KIND]

Every subcommand takes --format human|json (graph also dot) and --max-states.
Every constant defined in ENVS.pepa is one high environment of the battery.

Exit codes: 0 holds / secure, 1 does not hold / insecure, 2 usage or parse
error, 3 model invalid (validation, incompleteness, reducible chain, limits).

Reads env vars from .env (see config.py): EPSNI_MAX_STATES, EPSNI_SOLVER,
EPSNI_FLOAT_TOLERANCE, EPSNI_LOG_LEVEL.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Callable

import config
from ctmc import (
    SOLVERS,
    block_probabilities,
    ctmc_to_json,
    generator,
    probability_text,
    steady_state,
    unequal_blocks,
)
from equivalence import (
    KINDS,
    AnalysisGraph,
    EquivalenceKind,
    coarsest,
    equivalent,
    partition_to_json,
    violation_to_json,
)
from oracle import largest_by_enumeration
from pepa_model import TAU, Const, Diagnostic, ModelEnv, PepaError, format_rational, format_term, validate
from pepa_parser import ParseError, parse_file
from reporting import document, dumps, partition_table, table, witness_table
from security import (
    HighEnvironment,
    SecurityVerdict,
    check_epsni,
    check_epsni_definition,
    check_psni_with,
    check_unwinding,
    unwinding_to_json,
    verdict_to_json,
)
from semantics import derive, graph_to_dot, graph_to_json, is_complete, rate_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_MODEL = 0, 1, 2, 3

_ACTION = re.compile(r"^[a-z][A-Za-z0-9_']*$")


class UsageError(PepaError):
    pass


class InvalidModelError(PepaError):
    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


# ── helpers ───────────────────────────────────────────────────────────────────

def _high_set(text: str) -> frozenset[str]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    for name in names:
        if not _ACTION.match(name):
            raise argparse.ArgumentTypeError(f"{name!r} is not an action name")
        if name == TAU:
            raise argparse.ArgumentTypeError("tau cannot be a high action")
    return frozenset(names)


def _diagnostic_json(d: Diagnostic) -> dict:
    return {"code": d.code, "message": d.message, "location": None if d.span is None else str(d.span)}


def _load(path: str, high: frozenset[str] | None = None, *, check: bool = True) -> ModelEnv:
    env = parse_file(path)
    if high is not None:
        if env.high and env.high != high:
            print(
                f"⚠️  --high {{{', '.join(sorted(high))}}} overrides high "
                f"{{{', '.join(sorted(env.high))}}} declared in {path}",
                file=sys.stderr,
            )
        env = env.with_high(high)
    if check:
        diagnostics = validate(env)
        if diagnostics:
            raise InvalidModelError(diagnostics)
    return env


def _load_battery(path: str, model: ModelEnv) -> list[HighEnvironment]:
    envs = parse_file(path, require_system=False)
    diagnostics = validate(envs.with_high(model.high))
    if diagnostics:
        raise InvalidModelError(diagnostics)
    return [HighEnvironment.from_constant(envs, name) for name in envs.defs]


def _emit(args: argparse.Namespace, kind: str, fields: dict, human: str) -> None:
    if args.format == "json":
        sys.stdout.write(dumps(document(kind, file=args.model, **fields)))
    else:
        print(human)


def _report_error(args: argparse.Namespace, kind: str, messages: list[str]) -> None:
    for message in messages:
        print(f"❌ {message}", file=sys.stderr)
    if getattr(args, "format", "human") == "json":
        sys.stdout.write(dumps(document("error", kind=kind, messages=messages)))


def _kind(args: argparse.Namespace, env: ModelEnv) -> EquivalenceKind:
    return EquivalenceKind.parse(args.kind, env.high)


# ── subcommands ───────────────────────────────────────────────────────────────

def cmd_validate(args: argparse.Namespace) -> int:
    env = _load(args.model, args.high, check=False)
    diagnostics = validate(env)
    if diagnostics:
        lines = [f"❌ {d}" for d in diagnostics]
    else:
        lines = [f"✅ {args.model}: {len(env.defs)} definitions, system {format_term(env.root)}"]
    _emit(
        args,
        "validation",
        {"valid": not diagnostics, "diagnostics": [_diagnostic_json(d) for d in diagnostics]},
        "\n".join(lines),
    )
    return EXIT_MODEL if diagnostics else EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    env = _load(args.model)
    graph = derive(env, max_states=args.max_states)
    if args.format == "dot":
        sys.stdout.write(graph_to_dot(graph, Path(args.model).stem))
        return EXIT_OK
    report = is_complete(graph)
    states = table(((i, graph.label(i)) for i in range(len(graph))), ("#", "state"))
    edges = table(
        ((e.src, e.action, rate_text(e.rate), e.dst, e.multiplicity) for e in graph.edges),
        ("src", "action", "rate", "dst", "mult"),
    )
    status = "✅ complete" if report.complete else f"⚠️  incomplete: passive activities in states {list(report.offenders)}"
    if report.absorbing:
        status += f"; absorbing states {list(report.absorbing)}"
    _emit(args, "graph", graph_to_json(graph), f"{states}\n\n{edges}\n\n{status}")
    return EXIT_OK


def cmd_ctmc(args: argparse.Namespace) -> int:
    env = _load(args.model)
    graph = derive(env, max_states=args.max_states)
    gen = generator(graph)
    steady = None
    if args.steady or args.lump:
        steady = steady_state(gen, graph, method=args.solver)
    fields = ctmc_to_json(graph, gen, steady)
    rows = []
    for i in range(len(graph)):
        row = [i, graph.label(i), format_rational(-gen[i, i])]
        if steady is not None:
            p = steady[i]
            row.append(format_rational(p) if steady.exact else f"{p:.12g}")
        rows.append(row)
    headers = ["#", "state", "exit rate"] + (["steady state"] if steady is not None else [])
    human = [table(rows, headers)]

    fields["lumping"] = None
    if args.lump:
        kind = EquivalenceKind.parse(args.lump, env.high)
        analysis = AnalysisGraph(graph)
        partition = coarsest(analysis, kind)
        mass = block_probabilities(steady, partition.blocks)
        unequal = unequal_blocks(steady, partition.blocks)
        fields["lumping"] = {
            "kind": kind.name,
            "blocks": [list(b) for b in partition.blocks],
            "blockProbabilities": [probability_text(p) for p in mass],
            "equiprobable": not unequal,
            "unequalBlocks": unequal,
        }
        human.append(
            table(
                ((k, ", ".join(graph.label(i) for i in b), probability_text(mass[k])) for k, b in enumerate(partition.blocks)),
                ("block", "states", "probability"),
            )
        )
        human.append("✅ blocks are equiprobable" if not unequal else f"⚠️  blocks {unequal} are not equiprobable")
    _emit(args, "ctmc", fields, "\n\n".join(human))
    return EXIT_OK


def cmd_equiv(args: argparse.Namespace) -> int:
    env = _load(args.model)
    for flag, name in (("--left", args.left), ("--right", args.right)):
        if name not in env.defs:
            raise UsageError(f"{flag} {name} is not a constant defined in {args.model}")
    kind = _kind(args, env)
    verdict = equivalent(env, Const(args.left), env, Const(args.right), kind)
    fields = {
        "kind": kind.name,
        "left": args.left,
        "right": args.right,
        "related": verdict.related,
        "witness": None if verdict.witness is None else violation_to_json(verdict.graph, verdict.witness),
        "certificate": partition_to_json(verdict.graph, verdict.certificate),
    }
    if verdict.related:
        human = f"✅ {args.left} and {args.right} are related by {kind}\n\n{partition_table(verdict.graph, verdict.certificate)}"
    else:
        human = f"❌ {args.left} and {args.right} are not related by {kind}\n\n{witness_table(verdict.graph, verdict.witness)}"
    _emit(args, "equivalence", fields, human)
    return EXIT_OK if verdict.related else EXIT_FAIL


def _verdict_text(verdict: SecurityVerdict) -> str:
    high = ", ".join(sorted(verdict.high))
    if verdict.secure:
        note = ""
        if verdict.vacuous:
            note = " (vacuous: empty battery)"
        elif not verdict.conclusive:
            note = " (battery passed; not a proof)"
        head = f"✅ SECURE [{verdict.method}, high {{{high}}}]{note}"
        if verdict.certificate is not None and verdict.graph is not None:
            return f"{head}\n\n{partition_table(verdict.graph, verdict.certificate)}"
        return head
    failing = verdict.failing
    lines = [f"❌ INSECURE [{verdict.method}, high {{{high}}}]", f"   derivative : {failing.derivative}"]
    if failing.environment is not None:
        lines.append(f"   environment: {failing.environment}")
    lines.append(f"   {failing.detail}")
    if failing.violation is not None and verdict.graph is not None:
        lines += ["", witness_table(verdict.graph, failing.violation)]
    return "\n".join(lines)


def _security_exit(args: argparse.Namespace, verdict: SecurityVerdict) -> int:
    _emit(args, "verdict", verdict_to_json(verdict), _verdict_text(verdict))
    return EXIT_OK if verdict.secure else EXIT_FAIL


def cmd_epsni(args: argparse.Namespace) -> int:
    return _security_exit(args, check_epsni(_load(args.model, args.high)))


def cmd_esni(args: argparse.Namespace) -> int:
    env = _load(args.model, args.high)
    return _security_exit(args, check_epsni_definition(env, _load_battery(args.envs, env)))


def cmd_psni(args: argparse.Namespace) -> int:
    env = _load(args.model, args.high)
    return _security_exit(args, check_psni_with(env, None, _load_battery(args.envs, env)))


def cmd_unwind(args: argparse.Namespace) -> int:
    report = check_unwinding(_load(args.model, args.high))
    rows = [
        (e.source, e.action, e.target, "yes" if e.high_equivalent else "no", "yes" if e.restricted_equivalent else "no")
        for e in report.edges
    ]
    if report.vacuous:
        head = "✅ no high edges: unwinding holds vacuously"
    elif report.passed:
        head = "✅ unwinding holds on every high edge"
    else:
        head = "❌ unwinding fails"
    human = head if report.vacuous else f"{head}\n\n" + table(rows, ("source", "action", "target", "≈ᴴ", "∖H ≈we"))
    _emit(args, "unwinding", unwinding_to_json(report), human)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_oracle(args: argparse.Namespace) -> int:
    env = _load(args.model)
    graph = AnalysisGraph(derive(env, max_states=args.max_states))
    kind = _kind(args, env)
    stats: dict = {}
    expected = largest_by_enumeration(graph, kind, stats=stats)
    refined = coarsest(graph, kind)
    agree = expected == refined
    fields = {
        "kind": kind.name,
        "states": [graph.label(i) for i in range(graph.n)],
        "oracle": [list(b) for b in expected.blocks],
        "refinement": [list(b) for b in refined.blocks],
        "agree": agree,
        "partitionsVisited": stats["visited"],
        "kept": stats["kept"],
    }
    head = (
        f"✅ enumeration and refinement agree on {len(refined)} blocks ({stats['visited']} partitions visited)"
        if agree
        else "❌ enumeration and refinement disagree"
    )
    _emit(args, "oracle", fields, f"{head}\n\n{partition_table(graph, refined)}")
    return EXIT_OK if agree else EXIT_FAIL


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "validate": cmd_validate,
    "graph": cmd_graph,
    "ctmc": cmd_ctmc,
    "equiv": cmd_equiv,
    "epsni": cmd_epsni,
    "esni": cmd_esni,
    "psni": cmd_psni,
    "unwind": cmd_unwind,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epsni", description="Exact stochastic non-interference checker for PEPA models.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_parser() -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("model", help="Path to a .pepa model.")
        common.add_argument("--format", choices=("human", "json"), default="human")
        common.add_argument("--max-states", type=int, default=None, help=f"Derivation cap (default {config.MAX_STATES}).")
        return common

    common = common_parser()

    high = argparse.ArgumentParser(add_help=False)
    high.add_argument("--high", type=_high_set, default=None, help="Comma-separated high actions; overrides the model's.")

    kind = argparse.ArgumentParser(add_help=False)
    kind.add_argument("--kind", choices=KINDS, default="exact")

    sub.add_parser("validate", parents=[common, high], help="Parse and validate a model.")
    graph = sub.add_parser("graph", parents=[common_parser()], help="Print the derivation graph.", conflict_handler="resolve")
    graph.add_argument("--format", choices=("human", "json", "dot"), default="human")

    ctmc = sub.add_parser("ctmc", parents=[common], help="Generator, steady state and lumping.")
    ctmc.add_argument("--steady", action="store_true", help="Solve for the steady-state distribution.")
    ctmc.add_argument("--solver", choices=SOLVERS, default=None, help=f"Steady-state solver (default {config.SOLVER}).")
    ctmc.add_argument("--lump", choices=KINDS, default=None, help="Lump by the coarsest partition of this kind.")

    equiv = sub.add_parser("equiv", parents=[common, kind], help="Decide whether two constants are related.")
    equiv.add_argument("--left", required=True, help="Left constant.")
    equiv.add_argument("--right", required=True, help="Right constant.")

    sub.add_parser("epsni", parents=[common, high], help="Decide EPSNI through P∖H ≈ᴴ P.")
    for name, text in (("esni", "weak-exact"), ("psni", "exact lumpability")):
        battery = sub.add_parser(name, parents=[common, high], help=f"Battery test of every derivative under {text}.")
        battery.add_argument("--envs", required=True, help="File whose constants are the high environments.")
    sub.add_parser("unwind", parents=[common, high], help="Unwinding diagnostic on every high edge.")
    sub.add_parser("oracle", parents=[common, kind], help="Compare refinement against partition enumeration.")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: config.LOG_LEVEL, 1: "INFO"}.get(args.verbose, "DEBUG")
    logging.basicConfig(format="[epsni] %(levelname)s %(message)s", stream=sys.stderr, level=level)
    if args.max_states is not None and args.max_states < 1:
        parser.error("--max-states must be positive")
    saved_cap = config.MAX_STATES
    if args.max_states is not None:
        config.MAX_STATES = args.max_states

    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        _report_error(args, "parse", [str(d) for d in exc.diagnostics])
        return EXIT_USAGE
    except OSError as exc:
        _report_error(args, "usage", [f"cannot read {exc.filename}: {exc.strerror}"])
        return EXIT_USAGE
    except UsageError as exc:
        _report_error(args, "usage", [str(exc)])
        return EXIT_USAGE
    except InvalidModelError as exc:
        _report_error(args, "model", [str(d) for d in exc.diagnostics])
        return EXIT_MODEL
    except PepaError as exc:
        _report_error(args, "model", [str(exc)])
        return EXIT_MODEL
    finally:
        config.MAX_STATES = saved_cap


if __name__ == "__main__":
    sys.exit(main())
