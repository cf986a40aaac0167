from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROPERTY_SETTINGS, model, random_models
from pepa_model import (
    NIL,
    TAU,
    Const,
    Coop,
    Hide,
    ModelEnv,
    Rate,
    RateError,
    UndefinedConstantError,
    action_alphabet,
    choice,
    format_rational,
    format_term,
    prefix,
    subterms,
    validate,
)

_POSITIVE = st.fractions(min_value=Fraction(1, 1000), max_value=1000).filter(lambda f: f > 0)
_RATES = st.one_of(_POSITIVE.map(Rate.active), _POSITIVE.map(Rate.top))


# ── rates ─────────────────────────────────────────────────────────────────────

def test_active_rates_sit_below_passive():
    assert Rate.active(1000) < Rate.top(Fraction(1, 2))
    assert Rate.active(3) < Rate.active(5)
    assert Rate.top(1) < Rate.top(2)
    assert min(Rate.top(2), Rate.active(7)) == Rate.active(7)


def test_mixed_addition_raises():
    with pytest.raises(RateError):
        Rate.active(1) + Rate.top()


def test_same_kind_addition_and_scaling():
    assert Rate.active(1) + Rate.active(2) == Rate.active(3)
    assert Rate.top(1) + Rate.top(1) == Rate.top(2)
    assert Rate.active(Fraction(1, 2)) * 4 == Rate.active(2)
    assert 3 * Rate.top() == Rate.top(3)


def test_rates_must_be_positive():
    with pytest.raises(RateError):
        Rate.active(0)
    with pytest.raises(RateError):
        Rate.top(-1)


def test_rate_rendering():
    assert str(Rate.active(Fraction(1, 3))) == "1/3"
    assert str(Rate.active(Fraction(1, 4))) == "0.25"
    assert str(Rate.active(2)) == "2"
    assert str(Rate.top()) == "T"
    assert str(Rate.top(2)) == "2*T"


@pytest.mark.parametrize(
    "value, text",
    [(Fraction(7, 20), "0.35"), (Fraction(-1, 2), "-0.5"), (Fraction(2, 3), "2/3"), (Fraction(5), "5")],
)
def test_format_rational(value, text):
    assert format_rational(value) == text


@PROPERTY_SETTINGS
@given(_RATES, _RATES)
def test_rate_order_is_strict_and_total(a, b):
    assert [a < b, a == b, b < a].count(True) == 1


@PROPERTY_SETTINGS
@given(_RATES, _RATES, _RATES)
def test_rate_order_is_transitive(a, b, c):
    if a < b and b < c:
        assert a < c


# ── validation ────────────────────────────────────────────────────────────────

def test_valid_model_has_no_diagnostics():
    assert validate(model("X = (a,1).X; system X;")) == []


def test_unguarded_constant_is_reported():
    diagnostics = validate(model("X = X + (a,1).X; system X;"))
    assert [d.code for d in diagnostics] == ["unguarded"]
    assert "unguarded constant X" in diagnostics[0].message


def test_mixed_rates_in_one_body():
    diagnostics = validate(model("X = (a,1).X + (a,T).X; system X;"))
    assert [d.message for d in diagnostics] == ["action a mixes active and passive in X"]


def test_undefined_constant_carries_location():
    diagnostics = validate(model("X = (a,1).Y;\nsystem X;"))
    assert diagnostics[0].code == "undefined"
    assert "undefined constant Y" in diagnostics[0].message
    assert diagnostics[0].span.line == 1


def test_programmatic_env_problems():
    body = prefix("a", 1, Const("X"))
    env = ModelEnv({"X": body, "Y": Coop(Const("X"), {"a"}, Const("X"))}, Coop(Const("X"), {TAU}, Const("W")), {TAU})
    codes = [d.code for d in validate(env)]
    assert "not-sequential" in codes
    assert "tau-set" in codes
    assert "undefined" in codes
    assert any(d.message == "tau in high set" for d in validate(env))


def test_validate_is_deterministic():
    env = model("X = X + (a,1).Y + (b,T).X; system X <c> Z;")
    assert validate(env) == validate(env)


# ── alphabet and rendering ────────────────────────────────────────────────────

def test_action_alphabet_examples():
    env = model("X = (a,1).(b,2).X; system X;")
    assert action_alphabet(env, Const("X")) == {"a", "b"}
    assert action_alphabet(env, Hide(Const("X"), {"a"})) == {"a", "b", TAU}
    assert action_alphabet(env, NIL) == frozenset()


def test_action_alphabet_undefined_constant():
    with pytest.raises(UndefinedConstantError) as info:
        action_alphabet(ModelEnv({}, NIL), Const("Ghost"))
    assert info.value.name == "Ghost"


@PROPERTY_SETTINGS
@given(random_models(max_states=5))
def test_alphabet_covers_every_subterm(env):
    whole = action_alphabet(env, env.root)
    for sub in subterms(env.root):
        assert action_alphabet(env, sub) <= whole


def test_format_term_parenthesises_only_when_needed():
    x, y = Const("X"), Const("Y")
    assert format_term(choice(prefix("a", 1, x), prefix("b", 2, y))) == "(a,1).X + (b,2).Y"
    assert format_term(prefix("a", 1, choice(x, y))) == "(a,1).(X + Y)"
    assert format_term(Hide(Coop(x, {"h"}, NIL), {"h"})) == "(X <h> 0)/{h}"
    assert format_term(Coop(Coop(x, set(), y), {"b", "a"}, x)) == "X <> Y <a,b> X"
    assert format_term(Coop(x, {"a"}, Coop(y, {"a"}, x))) == "X <a> (Y <a> X)"
