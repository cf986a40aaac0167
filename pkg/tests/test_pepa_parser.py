from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given

from conftest import MODELS, PROPERTY_SETTINGS, random_models, seeded_model
from pepa_model import NIL, Activity, Choice, Const, Coop, Hide, Prefix, Rate
from pepa_parser import ParseError, parse_file, parse_model, render, tokenize, SourceModel


def test_two_definitions_and_system():
    env = parse_model("X = (a,1.0).Y; Y = (b,2.0).X; system X;")
    assert list(env.defs) == ["X", "Y"]
    assert env.root == Const("X")
    assert env.high == frozenset()
    assert env.defs["X"] == Prefix(Activity("a", Rate.active(1)), Const("Y"))


def test_high_declaration():
    env = parse_model("P = (h,1).P; high {h, k}; system P;")
    assert env.high == {"h", "k"}


def test_rates_in_every_form():
    env = parse_model("X = (a,1/3).X + (b,0.25).X + (c,T).X + (d,2*T).X; system X;")
    rates = []
    term = env.defs["X"]
    while isinstance(term, Choice):
        rates.append(term.right.activity.rate)
        term = term.left
    rates.append(term.activity.rate)
    assert rates[::-1] == [Rate.active(Fraction(1, 3)), Rate.active(Fraction(1, 4)), Rate.top(), Rate.top(2)]


def test_cooperation_is_left_associative_and_hiding_binds_tighter():
    env = parse_model("X = (a,1).X; system X <a> X <> X/{a};")
    assert env.root == Coop(Coop(Const("X"), {"a"}, Const("X")), set(), Hide(Const("X"), {"a"}))


def test_comments_and_whitespace_do_not_matter():
    compact = parse_model("X=(a,1).X;system X;")
    spaced = parse_model("// a comment\nX =\n   (a, 1) . X ;  // trailing\n\nsystem   X ;")
    assert compact == spaced


def test_choice_as_root_and_parenthesised_choice():
    env = parse_model("X = (a,1).((b,1).X + (c,2).X); system X + (d,1).X;")
    assert isinstance(env.defs["X"].body, Choice)
    assert env.root == Choice(Const("X"), Prefix(Activity("d", Rate.active(1)), Const("X")))


def test_missing_semicolon_reports_end_of_input():
    with pytest.raises(ParseError) as info:
        parse_model("X = (a,1).X")
    (diagnostic,) = info.value.diagnostics
    assert "end of input" in diagnostic.message
    assert diagnostic.span.line == 1


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("X = (a,0).X; system X;", "positive"),
        ("X = (a,1).X; system X <tau> X;", "tau"),
        ("X = (a,1).X; system X/{tau};", "tau"),
        ("X = (a,1).X; high {tau}; system X;", "tau"),
        ("T = (a,1).T; system T;", "reserved"),
        ("X = (a,1).X; X = (b,1).X; system X;", "duplicate definition"),
        ("X = (a,1).X; high {h}; high {h}; system X;", "duplicate high"),
        ("X = (a,1).X; system X; system X;", "duplicate system"),
        ("X = (a,1).X;", "missing system"),
        ("X = (a,1/2*T).X; system X;", "integers"),
        ("X = (a,1).X; system X $ X;", "unexpected character"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as info:
        parse_model(text)
    assert any(fragment in d.message for d in info.value.diagnostics)


def test_error_location_is_line_and_column():
    with pytest.raises(ParseError) as info:
        parse_model("X = (a,1).X;\nY = (b,1)..Y;\nsystem X;", "bad.pepa")
    span = info.value.diagnostics[0].span
    assert (span.filename, span.line, span.column) == ("bad.pepa", 2, 11)


def test_definitions_only_file():
    env = parse_model("H = (h,T).H;", require_system=False)
    assert env.root == NIL
    assert list(env.defs) == ["H"]


def test_tokens_track_columns():
    tokens = tokenize(SourceModel("X =\n  (a,1)"))
    assert [(t.value, t.span.line, t.span.column) for t in tokens[:4]] == [
        ("X", 1, 1),
        ("=", 1, 3),
        ("(", 2, 3),
        ("a", 2, 4),
    ]


def test_render_rates():
    env = parse_model("X = (a,1/3).X + (b,T).X + (c,2*T).X + (d,0.5).X; high {h}; system X;")
    assert render(env) == "X = (a,1/3).X + (b,T).X + (c,2*T).X + (d,0.5).X;\nhigh {h};\nsystem X;\n"


@pytest.mark.parametrize("path", sorted(MODELS.glob("*.pepa")), ids=lambda p: p.name)
def test_round_trip_on_corpus(path):
    has_system = "system" in path.read_text(encoding="utf-8")
    env = parse_file(path, require_system=has_system)
    if has_system:
        assert parse_model(render(env)) == env


@pytest.mark.parametrize("seed", range(200))
def test_round_trip_on_random_models(seed):
    env = seeded_model(seed, max_states=8)
    assert parse_model(render(env)) == env


@PROPERTY_SETTINGS
@given(random_models(max_states=6, include_passive=True))
def test_round_trip_with_passive_rates(env):
    assert parse_model(render(env)) == env


@pytest.mark.parametrize(
    "rate, message",
    [
        ("1/0", "denominator must not be zero"),
        ("0", "rates must be positive"),
        ("0/5", "rates must be positive"),
        ("0.0", "rates must be positive"),
    ],
)
def test_bad_rate_literals_are_located(rate, message):
    with pytest.raises(ParseError) as info:
        parse_model(f"X = (a,{rate}).X; system X;")
    (diagnostic,) = info.value.diagnostics
    assert message in diagnostic.message
    assert (diagnostic.span.line, diagnostic.span.column) == (1, 8)
