import sys
import os
from fractions import Fraction

import pytest
import yaml

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.automata import Configuration, PpdaSpec, Visibility, make_rule
from app.errors import NotPvpda, NotVpda, ShapeError
from app.formats import read_ppda
from app.vpda_decision import (
    AttackerMove, ForcingRelation, Universe, annotations_to_yaml, attacker_forces, decide_vpda,
    forcing_table, game_member, gamma_shift, is_antichain, largest_forcing, lift_join, local_forcing,
    local_forcing_probabilistic, minimize, soundness_report,
)

SAMPLES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")
VISIBILITY = Visibility(["r"], ["i"], ["c"])


def cfg(state, *stack):
    return Configuration(state, tuple(stack))


def popping_spec():
    """pX pops, pY loops on i, pY calls into pXY."""
    return PpdaSpec(("p",), ("X", "Y"), ("r", "i", "c"), (
        make_rule("p", "X", "r", [(1, "p", ())]),
        make_rule("p", "Y", "i", [(1, "p", ("Y",))]),
        make_rule("p", "Y", "c", [(1, "p", ("X", "Y"))]),
    ), VISIBILITY)


def looping_spec():
    """Two symbols that only ever loop on i."""
    return PpdaSpec(("p",), ("X", "Y"), ("r", "i", "c"), (
        make_rule("p", "X", "i", [(1, "p", ("X",))]),
        make_rule("p", "Y", "i", [(1, "p", ("Y",))]),
    ), VISIBILITY)


def coin_spec():
    """Fair coin between X and Y on i, from either symbol."""
    half = Fraction(1, 2)
    return PpdaSpec(("p",), ("X", "Y"), ("r", "i", "c"), (
        make_rule("p", "X", "i", [(half, "p", ("X",)), (half, "p", ("Y",))]),
        make_rule("p", "Y", "i", [(half, "p", ("X",)), (half, "p", ("Y",))]),
    ), VISIBILITY)


def draining_spec():
    """pX flips to X or Y on i; only pY can return."""
    half = Fraction(1, 2)
    return PpdaSpec(("p",), ("X", "Y"), ("r", "i", "c"), (
        make_rule("p", "X", "i", [(half, "p", ("X",)), (half, "p", ("Y",))]),
        make_rule("p", "Y", "r", [(1, "p", ())]),
    ), VISIBILITY)


class TestAntichains:
    """Bitmask sets over a universe of pairs"""

    def test_minimize(self):
        assert minimize([0b11, 0b01, 0b110, 0b01]) == (0b01, 0b110)
        assert minimize([0, 0b1]) == (0,)
        assert is_antichain(minimize([0b11, 0b01, 0b110]))
        assert not is_antichain([0b01, 0b11])

    def test_universe(self):
        universe = Universe(["a", "b"])
        assert universe.mask(["b"]) == 0b10
        assert universe.known_mask(["b", "zz"]) == 0b10
        assert list(universe.elements(0b11)) == ["a", "b"]

    def test_witness_and_cover(self):
        universe = Universe()
        relation = ForcingRelation(universe)
        relation.set("s", [universe.mask(["a", "b"]), universe.mask(["a"])])
        assert relation.size() == 1
        assert relation.member("s", ["a", "c"])
        assert not relation.member("s", ["b"])
        bigger = ForcingRelation(universe)
        bigger.set("s", [universe.mask(["a", "b"])])
        assert relation.covers(bigger)
        assert not bigger.covers(relation)


class TestComposition:
    """Lifting and stack shifting of forcing relations"""

    def test_lift_join(self):
        """Each element of a minimal set is replaced by one of its own minimal sets"""
        first_u, second_u = Universe(), Universe()
        first, second = ForcingRelation(first_u), ForcingRelation(second_u)
        first.set("s", [first_u.mask(["a", "b"])])
        second.set("a", [second_u.mask(["x"]), second_u.mask(["y"])])
        second.set("b", [second_u.mask(["x"])])
        joined = lift_join(first, second)
        assert joined.as_sets()["s"] == frozenset({frozenset({"x"})})

    def test_lift_join_missing_element(self):
        """An element with no entry makes the set useless"""
        first_u, second_u = Universe(), Universe()
        first, second = ForcingRelation(first_u), ForcingRelation(second_u)
        first.set("s", [first_u.mask(["a", "b"])])
        second.set("a", [second_u.mask(["x"])])
        assert "s" not in lift_join(first, second)

    def test_lift_join_empty_set(self):
        """The empty set lifts to the empty set"""
        first, second = ForcingRelation(Universe()), ForcingRelation(Universe())
        first.set("s", [0])
        assert lift_join(first, second).get("s") == (0,)

    def test_gamma_shift(self):
        """One entry over two symbols gives four shifted entries"""
        universe = Universe()
        relation = ForcingRelation(universe)
        relation.set((cfg("p", "X"), cfg("p", "X")), [universe.mask([(cfg("p"), cfg("p"))])])
        shifted = gamma_shift(relation, ("X", "Y"))
        assert len(shifted) == 4
        assert shifted.member((cfg("p", "X", "X"), cfg("p", "X", "Y")), [(cfg("p", "X"), cfg("p", "Y"))])

    def test_gamma_shift_empty(self):
        assert len(gamma_shift(ForcingRelation(Universe()), ("X", "Y"))) == 0


class TestLocalForcing:
    """One-step relations"""

    def test_defender_stuck(self):
        """pX can return, pY cannot: the pair is forced into the empty set"""
        relation = local_forcing(popping_spec(), "r")
        assert relation.get((cfg("p", "X"), cfg("p", "Y"))) == (0,)

    def test_both_dead(self):
        relation = local_forcing(popping_spec(), "r")
        assert (cfg("p", "Y"), cfg("p", "Y")) not in relation

    def test_matching_moves(self):
        relation = local_forcing(popping_spec(), "r")
        assert relation.as_sets()[(cfg("p", "X"), cfg("p", "X"))] == frozenset({frozenset({(cfg("p"), cfg("p"))})})

    def test_requires_visibility(self):
        with pytest.raises(NotVpda):
            local_forcing(read_ppda(os.path.join(SAMPLES, "example1.ppda")), "a")

    def test_requires_dirac(self):
        with pytest.raises(NotVpda):
            local_forcing(coin_spec(), "i")

    def test_probabilistic_agrees_with_game(self):
        """Composition through the reduction matches the three-step game search"""
        spec = coin_spec()
        relation = local_forcing_probabilistic(spec, "i")
        source = (cfg("p", "X"), cfg("p", "Y"))
        everything = [(cfg("p", a), cfg("p", b)) for a in "XY" for b in "XY"]
        assert game_member(spec, "i", source, everything)
        assert relation.member(source, everything)
        assert not game_member(spec, "i", source, [])
        assert not relation.member(source, [])

    def test_probabilistic_requires_visibility(self):
        with pytest.raises(NotPvpda):
            local_forcing_probabilistic(read_ppda(os.path.join(SAMPLES, "example1.ppda")), "a")


class TestLargestForcing:
    """Kleene iteration and the decision"""

    def test_popping_decisions(self):
        spec = popping_spec()
        forcing = largest_forcing(spec)
        assert not decide_vpda(spec, cfg("p", "X"), cfg("p", "Y"), forcing).bisimilar
        assert not decide_vpda(spec, cfg("p", "X"), cfg("p", "X", "X"), forcing).bisimilar
        assert decide_vpda(spec, cfg("p", "X", "Y"), cfg("p", "X", "Y"), forcing).bisimilar

    def test_annotation(self):
        """A one-round entry records the Attacker's return move"""
        spec = popping_spec()
        decision = decide_vpda(spec, cfg("p", "X"), cfg("p", "Y"))
        assert decision.verdict == "NOT_BISIMILAR"
        assert decision.witness == frozenset()
        assert decision.annotation.round == 1
        assert decision.annotation.move == AttackerMove("r", "left", cfg("p"))

    def test_looping_is_bisimilar(self):
        spec = looping_spec()
        forcing = largest_forcing(spec)
        assert forcing.relation.size() == 0
        assert decide_vpda(spec, cfg("p", "X"), cfg("p", "Y"), forcing).bisimilar
        assert decide_vpda(spec, cfg("p", "Y"), cfg("p", "Y", "Y"), forcing).bisimilar

    def test_probabilistic_coin(self):
        spec = coin_spec()
        forcing = largest_forcing(spec)
        assert forcing.probabilistic
        assert decide_vpda(spec, cfg("p", "X"), cfg("p", "Y"), forcing).bisimilar

    def test_trace_is_monotone(self):
        forcing = largest_forcing(popping_spec())
        sources = [row["Sources"] for row in forcing.trace]
        assert sources == sorted(sources)
        assert forcing.trace[-1]["Round"] == forcing.rounds

    def test_shape(self):
        with pytest.raises(ShapeError):
            decide_vpda(popping_spec(), cfg("p", "X", "X"), cfg("p", "Y", "Y"))

    def test_requires_visibility(self):
        with pytest.raises(NotVpda):
            largest_forcing(read_ppda(os.path.join(SAMPLES, "example1.ppda")))


class TestSoundness:
    """Replaying forcing entries in the bounded game"""

    def test_attacker_forces(self):
        spec = popping_spec()
        assert attacker_forces(spec, cfg("p", "X"), cfg("p", "X"), [(cfg("p"), cfg("p"))], 1)
        assert not attacker_forces(spec, cfg("p", "X"), cfg("p", "X"), [], 1)

    def test_report(self):
        spec = popping_spec()
        report = soundness_report(spec, largest_forcing(spec))
        assert report["Checked"] >= 1
        assert report["Failures"] == []
        assert report["Mode"] == "direct"

    def test_probabilistic_report(self):
        """Probabilistic entries are replayed on the visibly reduction"""
        spec = draining_spec()
        forcing = largest_forcing(spec)
        assert forcing.probabilistic
        report = soundness_report(spec, forcing)
        assert report["Mode"] == "reduced"
        assert report["Checked"] >= 2
        assert report["Failures"] == []


class TestRenderings:
    def test_table_and_yaml(self):
        forcing = largest_forcing(popping_spec())
        table = forcing_table(forcing)
        assert list(table.columns) == ["Left", "Right", "Minimal Set", "Round"]
        assert len(table) == forcing.relation.size()
        document = yaml.safe_load(annotations_to_yaml(forcing))
        assert document["rounds"] == forcing.rounds
        assert len(document["entries"]) == forcing.relation.size()
