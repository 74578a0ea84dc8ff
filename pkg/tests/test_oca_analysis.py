import sys
import os
import unittest.mock as mock

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.automata import Configuration, PpdaSpec, make_rule
from app.errors import FrontierError, MalformedCertificate, NotPoca
from app.formats import read_ppda
from app.hardness_gadgets import OneLetterAfa, acc_oracle, afa_to_poca
from app.oca_analysis import (
    Background, Belt, Colouring, CounterAnalysis, GridBounds, GridPoint, background_period, classify_background,
    certificate_from_grid, colouring_from_yaml, colouring_to_yaml, compute_dist, compute_inc,
    consistency_check, counter_configuration, counter_value, cycle_effects, decide_bounded_grid,
    dist_table, inc_table, underlying_flts, verify_periodic_certificate,
)
from app.semantics import unfold

SAMPLES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")


def load(name):
    return read_ppda(os.path.join(SAMPLES, name))


def twin_counters():
    """p and q both pop one X per step."""
    return PpdaSpec(("p", "q"), ("X", "Z"), ("a",), (
        make_rule("p", "X", "a", [(1, "p", ())]),
        make_rule("q", "X", "a", [(1, "q", ())]),
    ))


def diagonal_certificate(spec, bound=2):
    """Colour 1 exactly on m == n, with a one-wide diagonal belt beyond the explicit region."""
    explicit = {GridPoint(m, n, p, q): int(m == n)
                for m in range(bound + 1) for n in range(bound + 1) for p in spec.states for q in spec.states}
    pattern = {(phase, 0, p, q): 1 for phase in range(2) for p in spec.states for q in spec.states}
    return Colouring(len(spec.states), 2, bound, bound, explicit, [Belt(1, 1, 0, 1, pattern)])


def worked_class(c):
    """Class index of a configuration under the worked bisimulation."""
    if c.state == "p":
        return ("A", len(c.stack) - 1)
    if c.state == "q":
        return ("B", len(c.stack) - 2)
    if c.stack and c.stack[0] == "Y":
        return ("B", len(c.stack) - 1)
    return ("A", len(c.stack))


class TestCounterBasics:
    """Counter configurations and the underlying finite system"""

    def test_counter_round_trip(self):
        c = counter_configuration("p", 3)
        assert c == Configuration("p", ("X", "X", "X", "Z"))
        assert counter_value(c) == ("p", 3)

    def test_not_a_counter(self):
        with pytest.raises(ValueError):
            counter_value(Configuration("p", ("Z", "X")))

    def test_requires_poca(self):
        with pytest.raises(NotPoca):
            compute_inc(load("example1.ppda"))

    def test_underlying_flts(self):
        """Targets fold onto their control states"""
        flts = underlying_flts(load("example1_poca.ppda"))
        ((action, dist),) = flts.successors("p")
        assert action == "a"
        assert set(dist) == {"p", "q"}
        ((_, dist),) = flts.successors("q")
        assert set(dist) == {"p"}


class TestIncAndDist:
    """Incompatible configurations and distances to them"""

    def setup_method(self):
        self.spec = load("example1_poca.ppda")
        self.analysis = CounterAnalysis(self.spec)

    def test_inc(self):
        """Dead bottoms and pXZ are apart from every finite state"""
        assert self.analysis.inc == frozenset({
            Configuration("p", ("Z",)), Configuration("q", ("Z",)), Configuration("p", ("X", "Z")),
        })

    def test_dist_p(self):
        assert self.analysis.dist("p", 0).value == 0
        for m in range(1, 8):
            assert self.analysis.dist("p", m).value == m - 1

    def test_dist_q(self):
        assert self.analysis.dist("q", 0).value == 0
        for n in range(1, 8):
            assert self.analysis.dist("q", n).value == n + 1

    def test_compute_dist_with_budget(self):
        """A budget that is too small leaves dist undefined"""
        result = compute_dist(self.spec, counter_configuration("p", 6), 3)
        assert not result.finite
        assert str(result) == "INFINITY_UP_TO(3)"

    def test_background(self):
        """Different finite dists colour 0, equal ones may lie in a belt"""
        assert self.analysis.background(GridPoint(1, 1, "p", "q")) is Background.COLOUR_0
        assert self.analysis.background(GridPoint(3, 3, "p", "p")) is Background.NOT_BACKGROUND

    def test_classify_background(self):
        assert classify_background(self.spec, GridPoint(2, 2, "p", "q")) is Background.COLOUR_0
        assert classify_background(self.spec, GridPoint(3, 1, "p", "q")) is Background.NOT_BACKGROUND

    def test_tables(self):
        assert len(inc_table(self.spec, self.analysis.inc)) == 3
        table = dist_table(self.analysis, 4)
        assert list(table["p"]) == ["0", "0", "1", "2", "3"]


class TestConsistency:
    """Local consistency of candidate relations"""

    def test_worked_bisimulation(self):
        """The worked classes are consistent on a ball interior"""
        spec = load("example1.ppda")
        ball = unfold(spec, Configuration("p", ("X", "Z")), Configuration("r", ("X",)), 4)
        relation = {(s, t) for s in ball.states for t in ball.states if worked_class(s) == worked_class(t)}
        check = {(s, t) for s, t in relation if s in ball.transitions and t in ball.transitions}
        assert consistency_check(ball.transitions, relation, check).consistent

    def test_witness(self):
        """pXZ and qXZ do not match"""
        spec = load("example1_poca.ppda")
        analysis = CounterAnalysis(spec)
        s, t = counter_configuration("p", 1), counter_configuration("q", 1)
        fragment = {s: list(analysis.moves("p", 1)), t: list(analysis.moves("q", 1))}
        result = consistency_check(fragment, {(s, t)})
        assert not result.consistent
        assert result.pair == (s, t)
        assert str(result).startswith("WITNESS")

    def test_frontier(self):
        s, t = counter_configuration("p", 1), counter_configuration("q", 1)
        with pytest.raises(FrontierError):
            consistency_check({s: []}, {(s, t)})


class TestBoundedGrid:
    """Greatest consistent colouring of a bounded grid"""

    def setup_method(self):
        self.spec = load("example1_poca.ppda")

    def test_identity(self):
        c = counter_configuration("p", 1)
        result = decide_bounded_grid(self.spec, c, c)
        assert result.verdict == "BISIMILAR_CERTIFIED"

    def test_not_bisimilar(self):
        result = decide_bounded_grid(self.spec, counter_configuration("p", 1), counter_configuration("q", 1))
        assert result.verdict == "NOT_BISIMILAR"
        assert result.depth == 2
        assert str(result) == "NOT_BISIMILAR(2)"

    @mock.patch.dict(os.environ, {}, clear=True)
    def test_side_cap(self):
        """Gadget-sized automata get a capped grid unless sides are given"""
        spec = afa_to_poca(OneLetterAfa(("q0",), "q0", frozenset(), {"q0": ("and", "q0", "q0")})).spec
        assert len(spec.states) == 9
        bounds = GridBounds.default(spec)
        assert (bounds.m_max, bounds.n_max) == (6, 6)
        assert GridBounds.default(spec, 10, 2).m_max == 10
        assert GridBounds.default(self.spec).m_max == 4

    @mock.patch.dict(os.environ, {"BISIM_GRID_SIDE": "3"})
    def test_side_cap_from_environment(self):
        assert GridBounds.default(self.spec).m_max == 3

    def test_outside_bounds(self):
        bounds = GridBounds.default(self.spec, 2, 2)
        with pytest.raises(ValueError):
            decide_bounded_grid(self.spec, counter_configuration("p", 3), counter_configuration("p", 3), bounds)


class TestAfaGrid:
    """Counter pairs of the AFA encoding are related exactly when the counter is not accepted"""

    AUTOMATA = [
        OneLetterAfa(("q0",), "q0", frozenset(), {"q0": ("and", "q0", "q0")}),
        OneLetterAfa(("q0",), "q0", frozenset({"q0"}), {"q0": ("or", "q0", "q0")}),
        OneLetterAfa(("q0", "q1"), "q0", frozenset({"q1"}),
                     {"q0": ("and", "q1", "q1"), "q1": ("or", "q0", "q0")}),
    ]

    @pytest.mark.parametrize("afa", AUTOMATA)
    def test_verdicts_follow_acceptance(self, afa):
        encoded = afa_to_poca(afa)
        bounds = GridBounds.default(encoded.spec, 4, 4)
        for q in afa.states:
            for n in range(4):
                result = decide_bounded_grid(encoded.spec, counter_configuration(q, n),
                                             counter_configuration(encoded.primes[q], n), bounds)
                expected = "NOT_BISIMILAR" if acc_oracle(afa, q, n) else "BISIMILAR_CERTIFIED"
                assert result.verdict == expected, f"{q}, n={n}: {result}"


class TestCertificates:
    """Periodic colourings"""

    def setup_method(self):
        self.spec = load("example1_poca.ppda")

    def test_cycle_period(self):
        """Self-loop pops one, the p-q cycle pushes two"""
        assert cycle_effects(self.spec) == {-1, 2}
        assert background_period(self.spec) == 2

    def test_psi_must_be_multiple_of_period(self):
        colouring = Colouring(2, 3, 0, 0, {GridPoint(0, 0, p, q): 1 for p in "pq" for q in "pq"})
        with pytest.raises(MalformedCertificate):
            verify_periodic_certificate(self.spec, colouring)

    def test_missing_explicit_point(self):
        colouring = Colouring(2, 2, 0, 0, {GridPoint(0, 0, "p", "p"): 1})
        with pytest.raises(MalformedCertificate):
            verify_periodic_certificate(self.spec, colouring)

    def test_identity_coloured_zero(self):
        explicit = {GridPoint(0, 0, p, q): 1 for p in "pq" for q in "pq"}
        explicit[GridPoint(0, 0, "p", "p")] = 0
        verdict = verify_periodic_certificate(self.spec, Colouring(2, 2, 0, 0, explicit))
        assert not verdict.accepted
        assert verdict.point == GridPoint(0, 0, "p", "p")

    def test_diagonal_accepted(self):
        spec = twin_counters()
        verdict = verify_periodic_certificate(spec, diagonal_certificate(spec))
        assert verdict.accepted
        assert str(verdict) == "ACCEPTED"

    def test_flipped_colour_named(self):
        """A related pair coloured 0 is reported at its own point"""
        spec = twin_counters()
        colouring = diagonal_certificate(spec)
        colouring.explicit[GridPoint(1, 1, "p", "q")] = 0
        verdict = verify_periodic_certificate(spec, colouring)
        assert not verdict.accepted
        assert verdict.point == GridPoint(1, 1, "p", "q")

    def test_from_grid_and_yaml(self):
        """A certificate built from the grid survives the YAML text form"""
        bounds = GridBounds.default(self.spec, 3, 3)
        c = counter_configuration("p", 1)
        result = decide_bounded_grid(self.spec, c, c, bounds)
        colouring = certificate_from_grid(self.spec, result.colouring, bounds, [Belt(1, 1, 0, 1)])
        assert colouring.psi == 2
        assert len(colouring.explicit) == 4 * 4 * 4
        again = colouring_from_yaml(colouring_to_yaml(colouring))
        assert again == colouring

    def test_malformed_yaml(self):
        with pytest.raises(MalformedCertificate):
            colouring_from_yaml("k: [unclosed")
        with pytest.raises(MalformedCertificate):
            colouring_from_yaml("psi: 2\n")
