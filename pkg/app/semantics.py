# app/semantics.py

import itertools
import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import graphviz

from app.automata import render_rational
from app.errors import BudgetExceeded, UnknownStateError
from app.utils import get_exploration_cap

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class InducedPlts:
    """
    Lazily expanded pLTS S(spec). A rule qX --a--> d induces
    qX beta --a--> d' with d'(p alpha beta) = d(p alpha).
    """

    def __init__(self, spec):
        self.spec = spec
        self._cache = {}

    def successors(self, configuration):
        cached = self._cache.get(configuration)
        if cached is not None:
            return cached
        moves = ()
        if not configuration.is_empty:
            moves = tuple(
                (rule.action,
                 rule.distribution.map(lambda t, c=configuration: c.replace_top(t[0], t[1])))
                for rule in self.spec.rules_for(configuration.state, configuration.top)
            )
        self._cache[configuration] = moves
        return moves

    __call__ = successors


@dataclass
class Ball:
    """Every state within `radius` steps of a center, with transitions below the radius."""

    centers: tuple
    radius: int
    states: tuple
    depth: dict
    transitions: dict

    def interior(self, margin=0):
        return [s for s in self.states if self.depth[s] <= self.radius - margin]


def explore(successors, centers, radius, cap=None):
    """
    Breadth-first exploration from several centers at once.
    States are ordered by discovery: the centers first, in the given order.
    """
    cap = get_exploration_cap() if cap is None else cap
    order, depth, transitions = [], {}, {}
    queue = deque()
    for center in centers:
        if center not in depth:
            depth[center] = 0
            order.append(center)
            queue.append(center)
    while queue:
        state = queue.popleft()
        if depth[state] >= radius:
            continue
        moves = tuple(successors(state))
        transitions[state] = moves
        for _, dist in moves:
            for target in dist:
                if target in depth:
                    continue
                depth[target] = depth[state] + 1
                order.append(target)
                queue.append(target)
                if len(order) > cap:
                    raise BudgetExceeded(
                        f"exploration passed the cap of {cap} states at depth {depth[target]}",
                        cap=cap)
    logger.debug(f"Explored {len(order)} states within radius {radius}")
    return Ball(tuple(centers), radius, tuple(order), depth, transitions)


def unfold(spec, c1, c2, n, cap=None):
    if n < 0:
        raise ValueError("radius must be non-negative")
    return explore(InducedPlts(spec), (c1, c2), n, cap)


class Partition:
    """Explored states mapped to canonical blocks; a block is named by its least member."""

    def __init__(self, order, block_of):
        self.order = tuple(order)
        self.block_of = dict(block_of)

    def __contains__(self, state):
        return state in self.block_of

    def __eq__(self, other):
        return isinstance(other, Partition) and self.block_of == other.block_of

    def block(self, state):
        try:
            return self.block_of[state]
        except KeyError:
            raise UnknownStateError(f"state {state} is outside the partition") from None

    def same(self, s, t):
        return self.block(s) == self.block(t)

    def blocks(self):
        grouped = {}
        for state in self.order:
            grouped.setdefault(self.block_of[state], []).append(state)
        return [tuple(members) for members in grouped.values()]

    def refines(self, other):
        """Every block of self lies inside a block of other (on common states)."""
        for members in self.blocks():
            shared = [s for s in members if s in other]
            if len({other.block_of[s] for s in shared}) > 1:
                return False
        return True

    @classmethod
    def from_blocks(cls, blocks):
        order, block_of = [], {}
        for members in blocks:
            for state in members:
                order.append(state)
                block_of[state] = members[0]
        return cls(order, block_of)


def _lift(dist, block_of):
    masses = {}
    for target, p in dist.items():
        block = block_of[target]
        masses[block] = masses.get(block, Fraction(0)) + p
    return frozenset(masses.items())


def _signature(moves, block_of):
    return frozenset((action, _lift(dist, block_of)) for action, dist in moves)


def _split(members, previous, moves_of):
    refined, representative = {}, {}
    for state in members:
        key = (previous[state], _signature(moves_of(state), previous))
        refined[state] = representative.setdefault(key, state)
    return refined


def refine_levels(ball, levels=None):
    """
    Yield the ~_k partitions for k = 0..levels. Level k only covers states at
    depth <= radius - k, whose k-step behaviour lies fully inside the ball.
    """
    levels = ball.radius if levels is None else levels
    order = ball.states
    current = {s: order[0] for s in order}
    yield Partition(order, current)
    for k in range(1, levels + 1):
        horizon = ball.radius - k
        members = [s for s in order if ball.depth[s] <= horizon]
        current = _split(members, current, lambda s: ball.transitions.get(s, ()))
        yield Partition(members, current)


def refine_to_fixpoint(states, successors):
    """Plain partition refinement on a finite, fully known system."""
    order = list(states)
    if not order:
        return Partition((), {})
    current = {s: order[0] for s in order}
    while True:
        refined = _split(order, current, successors)
        if len(set(refined.values())) == len(set(current.values())):
            return Partition(order, refined)
        current = refined


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    depth: int

    def __str__(self):
        return f"{'EQUIVALENT_AT' if self.equivalent else 'DISTINGUISHED_AT'}({self.depth})"


def compare_at_depth(successors, c1, c2, n, cap=None):
    """Least k <= n with c1 and c2 apart under ~_k, over any successor function."""
    if c1 == c2:
        return Verdict(True, n)
    ball = explore(successors, (c1, c2), n, cap)
    for k, partition in enumerate(refine_levels(ball, n)):
        if not partition.same(c1, c2):
            return Verdict(False, k)
    return Verdict(True, n)


def bisim_depth(spec, c1, c2, n, cap=None):
    """
    Decide c1 ~_n c2 on the induced pLTS. Returns EQUIVALENT_AT(n) or
    DISTINGUISHED_AT(k) with k the least level separating the two.
    """
    if n < 0:
        raise ValueError("depth must be non-negative")
    verdict = compare_at_depth(InducedPlts(spec), c1, c2, n, cap)
    logger.info(f"{c1} vs {c2} at depth {n}: {verdict}")
    return verdict


def bisim_classes(spec, ball, n):
    """The ~_n partition of the ball states whose depth budget allows it."""
    if ball.radius < n:
        raise ValueError(f"ball radius {ball.radius} is smaller than {n}")
    partition = None
    for partition in refine_levels(ball, n):
        pass
    return partition


def search_distinguishing_depth(spec, c1, c2, max_depth, cap=None):
    """Smallest k <= max_depth with c1 !~_k c2, or None. Radii grow by doubling."""
    radius = 1
    while True:
        radius = min(radius, max_depth)
        verdict = compare_at_depth(InducedPlts(spec), c1, c2, radius, cap)
        if not verdict.equivalent:
            return verdict.depth
        if radius >= max_depth:
            return None
        radius *= 2


def reachable_system(spec, centers, cap=None):
    """Every configuration reachable from the centers, or None when not finite within cap."""
    try:
        return explore(InducedPlts(spec), centers, float("inf"), cap)
    except BudgetExceeded:
        return None


def decide_reachable(spec, c1, c2, cap=None):
    """Exact c1 ~ c2 when finitely many configurations are reachable; else None."""
    ball = reachable_system(spec, (c1, c2), cap)
    if ball is None:
        return None
    partition = refine_to_fixpoint(ball.states, lambda s: ball.transitions.get(s, ()))
    return partition.same(c1, c2)


def bisimulation_partition(plts):
    return refine_to_fixpoint(plts.states, plts.successors)


def _check_known(dist, partition):
    for state in dist:
        if state not in partition:
            raise UnknownStateError(f"support element {state} is outside the partition")


def r_equivalent(d, e, partition):
    """Equal mass on every block of the partition."""
    _check_known(d, partition)
    _check_known(e, partition)
    return _lift(d, partition.block_of) == _lift(e, partition.block_of)


def lemma1_check(d, e, partition):
    """
    For every subset A of the joint support: d(A) <= e(R(A)) and e(A) <= d(R(A)).
    Exponential in the support size; meant for small supports.
    """
    _check_known(d, partition)
    _check_known(e, partition)
    support = sorted(set(d) | set(e), key=str)
    for size in range(1, len(support) + 1):
        for subset in itertools.combinations(support, size):
            blocks = {partition.block_of[s] for s in subset}
            closure_d = sum((p for s, p in d.items() if partition.block_of[s] in blocks), Fraction(0))
            closure_e = sum((p for s, p in e.items() if partition.block_of[s] in blocks), Fraction(0))
            if d.mass(subset) > closure_e or e.mass(subset) > closure_d:
                return False
    return True


def _render_moves(moves):
    rendered = []
    for action, dist in moves:
        body = ", ".join(f"{render_rational(p)} {t}" for t, p in dist.items())
        rendered.append(f"{action}: [{body}]")
    return "; ".join(rendered)


def dump_ball(ball, partition=None):
    """One state per line: state, depth, block, outgoing transitions."""
    lines = []
    for state in ball.states:
        block = "-"
        if partition is not None and state in partition:
            block = str(partition.block_of[state])
        moves = ball.transitions.get(state)
        shown = "(frontier)" if moves is None else (_render_moves(moves) or "(dead)")
        lines.append(f"{state}\tdepth={ball.depth[state]}\tblock={block}\t{shown}")
    return "\n".join(lines)


def ball_to_dot(ball, name="ball"):
    dot = graphviz.Digraph(name=name)
    ids = {state: f"s{i}" for i, state in enumerate(ball.states)}
    for state in ball.states:
        shape = "doublecircle" if state in ball.centers else "ellipse"
        dot.node(ids[state], label=str(state), shape=shape)
    for state in ball.states:
        for action, dist in ball.transitions.get(state, ()):
            for target, p in dist.items():
                dot.edge(ids[state], ids[target], label=f"{action} {render_rational(p)}")
    return dot.source
