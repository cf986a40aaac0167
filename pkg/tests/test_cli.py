from __future__ import annotations

import json

import pytest
from jsonschema import Draft202012Validator

import config
import epsni
from conftest import MODELS

SCHEMA = json.loads((MODELS.parent / "schema" / "epsni.schema.json").read_text(encoding="utf-8"))
VALIDATOR = Draft202012Validator(SCHEMA)


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = epsni.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def path(name: str) -> str:
    return str(MODELS / name)


def run_json(capsys, *argv: str) -> tuple[int, dict]:
    code, out, _ = run(capsys, *argv, "--format", "json")
    doc = json.loads(out)
    VALIDATOR.validate(doc)
    return code, doc


# ── exit codes ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize(
    "argv, expected",
    [
        (("validate", "two_state.pepa"), 0),
        (("graph", "incomplete.pepa"), 0),
        (("ctmc", "two_state.pepa", "--steady"), 0),
        (("ctmc", "absorbing.pepa", "--steady"), 3),
        (("ctmc", "incomplete.pepa"), 3),
        (("epsni", "secure.pepa"), 0),
        (("epsni", "secure_high_loop.pepa"), 0),
        (("epsni", "insecure.pepa"), 1),
        (("epsni", "incomplete.pepa"), 3),
        (("esni", "insecure.pepa", "--envs", "high_envs.pepa"), 1),
        (("esni", "secure_high_loop.pepa", "--envs", "high_envs.pepa"), 0),
        (("psni", "insecure.pepa", "--envs", "high_envs.pepa"), 1),
        (("unwind", "insecure.pepa"), 1),
        (("unwind", "secure.pepa"), 0),
        (("equiv", "tau_pair.pepa", "--left", "X", "--right", "Y", "--kind", "exact"), 1),
        (("equiv", "tau_pair.pepa", "--left", "X", "--right", "Y", "--kind", "weak-exact"), 0),
        (("oracle", "prefix_pair.pepa", "--kind", "weak-exact"), 0),
    ],
)
def test_exit_codes(capsys, argv, expected):
    command, model, *rest = argv
    rest = [path(x) if x.endswith(".pepa") else x for x in rest]
    code, _, _ = run(capsys, command, path(model), *rest)
    assert code == expected


def test_usage_errors_exit_with_two(capsys):
    with pytest.raises(SystemExit) as info:
        epsni.main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        epsni.main(["graph", path("two_state.pepa"), "--max-states", "0"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        epsni.main(["epsni", path("insecure.pepa"), "--high", "tau"])
    code, _, err = run(capsys, "graph", path("no_such_model.pepa"))
    assert code == 2 and "cannot read" in err


def test_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.pepa"
    bad.write_text("X = (a,1).X", encoding="utf-8")
    code, out, err = run(capsys, "validate", str(bad), "--format", "json")
    assert code == 2
    assert "end of input" in err
    doc = json.loads(out)
    VALIDATOR.validate(doc)
    assert doc["kind"] == "parse"


def test_zero_denominator_is_a_parse_error(capsys, tmp_path):
    bad = tmp_path / "zero.pepa"
    bad.write_text("X = (a,1/0).X;\nsystem X;\n", encoding="utf-8")
    code, out, err = run(capsys, "validate", str(bad), "--format", "json")
    assert code == 2
    assert "zero.pepa:1:8" in err
    doc = json.loads(out)
    VALIDATOR.validate(doc)
    assert doc["kind"] == "parse"


def test_invalid_model(capsys, tmp_path):
    bad = tmp_path / "undefined.pepa"
    bad.write_text("X = (a,1).Y;\nsystem X;\n", encoding="utf-8")
    code, doc = run_json(capsys, "validate", str(bad))
    assert code == 3
    assert doc["valid"] is False
    assert doc["diagnostics"][0]["code"] == "undefined"
    code, _, err = run(capsys, "epsni", str(bad))
    assert code == 3 and "undefined constant Y" in err


def test_undefined_equiv_constant_is_a_usage_error(capsys):
    code, doc = run_json(capsys, "equiv", path("tau_pair.pepa"), "--left", "X", "--right", "Nope")
    assert code == 2
    assert doc["kind"] == "usage"
    assert "--right Nope" in doc["messages"][0]


def test_state_cap_is_restored(capsys):
    before = config.MAX_STATES
    code, _, err = run(capsys, "graph", path("producer_consumer.pepa"), "--max-states", "1")
    assert code == 3 and "❌" in err
    assert config.MAX_STATES == before


# ── documents ─────────────────────────────────────────────────────────────────

def test_verdict_document(capsys):
    code, doc = run_json(capsys, "epsni", path("insecure.pepa"))
    assert code == 1
    assert doc["document"] == "verdict"
    assert doc["failing"]["derivative"] == "P"
    assert doc["witness"]["clause"] == "in-own"


def test_ctmc_document(capsys):
    code, doc = run_json(capsys, "ctmc", path("two_state.pepa"), "--steady", "--solver", "exact", "--lump", "exact")
    assert code == 0
    assert doc["steadyState"] == ["2/3", "1/3"]
    assert doc["lumping"]["blocks"] == [[0], [1]]
    assert doc["lumping"]["equiprobable"] is True


@pytest.mark.parametrize(
    "argv",
    [
        ("validate", "two_state.pepa"),
        ("graph", "producer_consumer.pepa"),
        ("equiv", "tau_pair.pepa", "--left", "X", "--right", "Y", "--kind", "exact"),
        ("esni", "insecure.pepa", "--envs", "high_envs.pepa"),
        ("unwind", "insecure.pepa"),
        ("oracle", "two_state.pepa"),
        ("ctmc", "incomplete.pepa"),
    ],
)
def test_documents_match_the_schema(capsys, argv):
    command, model, *rest = argv
    rest = [path(x) if x.endswith(".pepa") else x for x in rest]
    run_json(capsys, command, path(model), *rest)


def test_json_output_is_byte_identical(capsys):
    argv = ("epsni", path("insecure.pepa"), "--format", "json")
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


# ── human output ──────────────────────────────────────────────────────────────

def test_high_override_warns(capsys):
    code, out, err = run(capsys, "epsni", path("insecure.pepa"), "--high", "h,k")
    assert code == 1
    assert "⚠️" in err and "overrides" in err
    assert "INSECURE" in out


def test_secure_human_report(capsys):
    code, out, _ = run(capsys, "epsni", path("secure_high_loop.pepa"))
    assert code == 0
    assert out.startswith("✅ SECURE [corollary, high {h}]")


def test_battery_pass_is_marked(capsys):
    code, out, _ = run(capsys, "esni", path("secure_high_loop.pepa"), "--envs", path("high_envs.pepa"))
    assert code == 0
    assert "not a proof" in out


def test_dot_output(capsys):
    code, out, _ = run(capsys, "graph", path("two_state.pepa"), "--format", "dot")
    assert code == 0
    assert out.startswith('digraph "two_state" {')
