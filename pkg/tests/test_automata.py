import sys
import os
from fractions import Fraction

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.automata import (
    Configuration, Distribution, PltsBuilder, PpdaSpec, Subclass, Visibility,
    as_nondeterministic, classify, embed_plts, embedded, is_dirac_only, make_rule, parse_rational,
    render_rational, validate,
)
from app.errors import UnvalidatedError
from app.formats import read_ppda

SAMPLES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")


def example1():
    return read_ppda(os.path.join(SAMPLES, "example1.ppda"))


class TestRationals:
    """Exact rationals in and out of text"""

    def test_decimal_and_fraction_agree(self):
        """0.5 and 5/10 are the same rational"""
        assert parse_rational("0.5") == parse_rational("5/10") == Fraction(1, 2)

    def test_negative_rejected(self):
        """Negative probabilities are refused"""
        with pytest.raises(ValueError):
            parse_rational("-1/2")

    def test_garbage_rejected(self):
        """Non-numbers are refused"""
        with pytest.raises(ValueError):
            parse_rational("half")

    def test_render(self):
        """Integers render without a denominator"""
        assert render_rational(Fraction(3, 10)) == "3/10"
        assert render_rational(Fraction(1)) == "1"


class TestDistribution:
    """Finite distributions with exact masses"""

    def test_duplicates_merge(self):
        """Repeated keys add up"""
        d = Distribution([("a", Fraction(1, 4)), ("a", Fraction(1, 4)), ("b", Fraction(1, 2))])
        assert d["a"] == Fraction(1, 2)
        assert d.total() == 1

    def test_non_positive_mass_rejected(self):
        """Zero mass is not a support element"""
        with pytest.raises(ValueError):
            Distribution([("a", 0)])

    def test_map_merges_images(self):
        """Push-forward adds the masses of keys with equal images"""
        d = Distribution([("a1", Fraction(1, 3)), ("a2", Fraction(1, 3)), ("b", Fraction(1, 3))])
        image = d.map(lambda k: k[0])
        assert image["a"] == Fraction(2, 3)
        assert image["b"] == Fraction(1, 3)

    def test_mass_and_dirac(self):
        """Subset mass and the Dirac constructor"""
        d = Distribution.half("x", "y")
        assert d.mass({"x"}) == Fraction(1, 2)
        assert Distribution.dirac("x").is_dirac()
        assert not d.is_dirac()

    def test_equality_ignores_order(self):
        """Equal maps are equal distributions"""
        assert Distribution([("a", 1)]) == Distribution({"a": Fraction(1)})


class TestConfiguration:
    """Configurations as state plus stack word"""

    def test_replace_top(self):
        """The top symbol is replaced by the pushed word"""
        c = Configuration("p", ("X", "Z"))
        assert c.replace_top("q", ("X", "X")) == Configuration("q", ("X", "X", "Z"))
        assert c.replace_top("p", ()) == Configuration("p", ("Z",))

    def test_empty_stack(self):
        """An empty stack has no top"""
        c = Configuration("p")
        assert c.is_empty
        assert c.top is None
        assert str(Configuration("p", ("X", "Z"))) == "pXZ"


class TestValidate:
    """Well-formedness checks"""

    def test_example_is_well_formed(self):
        """The worked example validates cleanly"""
        report = validate(example1())
        assert report.ok
        assert report.lines() == []

    def test_sum_not_one(self):
        """A distribution summing to 9/10 is reported"""
        spec = PpdaSpec(("p",), ("X",), ("a",),
                        (make_rule("p", "X", "a", [(Fraction(9, 10), "p", ())]),))
        report = validate(spec)
        assert not report.ok
        assert "9/10" in report.lines()[0]

    def test_push_too_long(self):
        """Rules push at most two symbols"""
        spec = PpdaSpec(("p",), ("X",), ("a",),
                        (make_rule("p", "X", "a", [(1, "p", ("X", "X", "X"))]),))
        assert any("at most 2" in line for line in validate(spec).lines())

    def test_undeclared_names(self):
        """Undeclared states and symbols are reported"""
        spec = PpdaSpec(("p",), ("X",), ("a",),
                        (make_rule("p", "X", "a", [(1, "q", ("Y",))]),))
        lines = validate(spec).lines()
        assert any("'q'" in line for line in lines)
        assert any("Y" in line for line in lines)

    def test_visibility_overlap(self):
        """An action cannot be both a call and a return"""
        spec = PpdaSpec(("p",), ("X",), ("a",), (), Visibility(["a"], [], ["a"]))
        assert any("more than one class" in line for line in validate(spec).lines())


class TestClassify:
    """Subclass detection"""

    def test_full_example(self):
        """Example automaton is fully probabilistic only"""
        assert classify(example1()) == frozenset({Subclass.FULLY_PROBABILISTIC})

    def test_counter_restriction(self):
        """States p, q and symbols X, Z give a pOCA"""
        restricted = example1().restrict({"p", "q"}, {"X", "Z"})
        assert classify(restricted) == frozenset({Subclass.POCA, Subclass.FULLY_PROBABILISTIC})
        assert len(restricted.rules) == 2

    def test_single_state_restriction(self):
        """State r with X, X', Y gives a pBPA"""
        restricted = example1().restrict({"r"}, {"X", "X'", "Y"})
        assert classify(restricted) == frozenset({Subclass.PBPA, Subclass.FULLY_PROBABILISTIC})
        assert len(restricted.rules) == 3

    def test_unvalidated_refused(self):
        """Classification requires a well-formed spec"""
        spec = PpdaSpec(("p",), ("X",), ("a",),
                        (make_rule("p", "X", "a", [(Fraction(1, 2), "p", ())]),))
        with pytest.raises(UnvalidatedError):
            classify(spec)

    def test_visibly_and_nondeterministic(self):
        """Push lengths matching the visibility classes"""
        spec = PpdaSpec(("p",), ("X",), ("r", "i", "c"), (
            make_rule("p", "X", "r", [(1, "p", ())]),
            make_rule("p", "X", "i", [(1, "p", ("X",))]),
            make_rule("p", "X", "c", [(1, "p", ("X", "X"))]),
        ), Visibility(["r"], ["i"], ["c"]))
        flags = classify(spec)
        assert Subclass.PVPDA in flags
        assert Subclass.NONDETERMINISTIC in flags


class TestConversions:
    """Nondeterministic view and pLTS embedding"""

    def test_as_nondeterministic(self):
        """Each support element becomes a Dirac rule"""
        spec = as_nondeterministic(example1())
        assert all(rule.distribution.is_dirac() for rule in spec.rules)
        assert len(spec.rules) == 2 + 1 + 3 + 1 + 3

    def test_embed_plts(self):
        """A finite pLTS embeds with one untouched stack symbol"""
        builder = PltsBuilder()
        builder.add_transition("s", "a", Distribution.half("s", "t"))
        spec = embed_plts(builder.build())
        (rule,) = spec.rules_for("s", "_")
        assert set(rule.distribution) == {("s", ("_",)), ("t", ("_",))}
        assert spec.is_dead(embedded("t"))

    def test_dirac_only(self):
        assert not is_dirac_only(example1())
        assert is_dirac_only(as_nondeterministic(example1()))
