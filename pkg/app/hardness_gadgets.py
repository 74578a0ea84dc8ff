# app/hardness_gadgets.py

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import NamedTuple

import networkx as nx
import pandas as pd

from app.automata import Configuration, Distribution, PltsBuilder, PpdaSpec, Rule, Visibility
from app.errors import BudgetExceeded, RedefinedError, ShapeError
from app.utils import get_exploration_cap, get_game_node_cap

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

GADGET_ACTION = "a"


def _check_fresh(ctx, *states):
    for state in states:
        if ctx.has_transitions(state):
            raise RedefinedError(f"state {state} already has outgoing transitions", state=state)


def build_and_gadget(ctx, s, s_prime, t1, t1_prime, t2, t2_prime, action=GADGET_ACTION):
    """
    s -a-> t1|t2 and s' -a-> t1'|t2'. Then s ~ s' iff t1 ~ t1' and t2 ~ t2',
    provided t1 and t2' are not bisimilar in the enclosing system.
    """
    _check_fresh(ctx, s, s_prime)
    ctx.add_transition(s, action, Distribution.half(t1, t2))
    ctx.add_transition(s_prime, action, Distribution.half(t1_prime, t2_prime))
    return ctx


def or_gadget_states(s):
    return (f"u12[{s}]", f"u1'2'[{s}]", f"u12'[{s}]", f"u1'2[{s}]")


def build_or_gadget(ctx, s, s_prime, t1, t1_prime, t2, t2_prime, action=GADGET_ACTION, names=None):
    """
    Six half-half transitions through u12, u1'2', u12', u1'2.
    Then s ~ s' iff t1 ~ t1' or t2 ~ t2'.
    """
    u12, u1p2p, u12p, u1p2 = names or or_gadget_states(s)
    _check_fresh(ctx, s, s_prime, u12, u1p2p, u12p, u1p2)
    ctx.add_transition(s, action, Distribution.half(u12, u1p2p))
    ctx.add_transition(s_prime, action, Distribution.half(u12p, u1p2))
    ctx.add_transition(u12, action, Distribution.half(t1, t2))
    ctx.add_transition(u1p2p, action, Distribution.half(t1_prime, t2_prime))
    ctx.add_transition(u12p, action, Distribution.half(t1, t2_prime))
    ctx.add_transition(u1p2, action, Distribution.half(t1_prime, t2))
    return ctx


def _demo_leaves(ctx, t1_equiv, t2_equiv):
    ctx.add_transition("t1", "b", Distribution.dirac("t1"))
    ctx.add_transition("t2", "c", Distribution.dirac("t2"))
    if t1_equiv:
        ctx.add_transition("t1'", "b", Distribution.dirac("t1'"))
    else:
        ctx.add_state("t1'")
    if t2_equiv:
        ctx.add_transition("t2'", "c", Distribution.dirac("t2'"))
    else:
        ctx.add_state("t2'")


def and_demo(t1_equiv=True, t2_equiv=True):
    """Small finite pLTS around an AND-gadget; returns (plts, s, s')."""
    ctx = PltsBuilder()
    _demo_leaves(ctx, t1_equiv, t2_equiv)
    build_and_gadget(ctx, "s", "s'", "t1", "t1'", "t2", "t2'")
    return ctx.build(), "s", "s'"


def or_demo(t1_equiv=True, t2_equiv=False):
    ctx = PltsBuilder()
    _demo_leaves(ctx, t1_equiv, t2_equiv)
    build_or_gadget(ctx, "s", "s'", "t1", "t1'", "t2", "t2'")
    return ctx.build(), "s", "s'"


# One-letter alternating automata


@dataclass
class OneLetterAfa:
    """delta maps each state to ("and" | "or", q1, q2)."""

    states: tuple
    initial: str
    accepting: frozenset = frozenset()
    delta: dict = field(default_factory=dict)

    def problems(self):
        found, declared = [], set(self.states)
        if len(declared) != len(self.states):
            found.append("duplicate AFA state")
        if self.initial not in declared:
            found.append(f"initial state {self.initial!r} is not declared")
        for q in sorted(set(self.accepting) - declared):
            found.append(f"accepting state {q!r} is not declared")
        for q in self.states:
            if q not in self.delta:
                found.append(f"no transition for {q!r}")
        for q, (kind, q1, q2) in self.delta.items():
            if q not in declared:
                found.append(f"transition for undeclared state {q!r}")
            if kind not in ("and", "or"):
                found.append(f"transition of {q!r} has unknown kind {kind!r}")
            for target in (q1, q2):
                if target not in declared:
                    found.append(f"transition of {q!r} refers to undeclared state {target!r}")
        return found


def _acceptance_rows(afa, n):
    rows = [{q: q in afa.accepting for q in afa.states}]
    for _ in range(n):
        previous = rows[-1]
        current = {}
        for q in afa.states:
            kind, q1, q2 = afa.delta[q]
            if kind == "and":
                current[q] = previous[q1] and previous[q2]
            else:
                current[q] = previous[q1] or previous[q2]
        rows.append(current)
    return rows


def acc_oracle(afa, q, n):
    """Acc(q, 0) iff q is accepting; Acc(q, n+1) follows delta(q) over Acc(., n)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return _acceptance_rows(afa, n)[n][q]


def acceptance_table(afa, n):
    rows = _acceptance_rows(afa, n)
    return pd.DataFrame([{"n": i, **row} for i, row in enumerate(rows)],
                        columns=["n", *afa.states])


class _Names:
    def __init__(self, taken=()):
        self.taken = set(taken)

    def fresh(self, name):
        while name in self.taken:
            name += "'"
        self.taken.add(name)
        return name


class AfaPoca(NamedTuple):
    spec: PpdaSpec
    p: str
    p_prime: str
    primes: dict


def afa_to_poca(afa):
    """
    Unary fully probabilistic pOCA with qX^nZ ~ q'X^nZ iff not Acc(q, n),
    and pXZ ~ p'XZ iff the AFA accepts no word.
    """
    problems = afa.problems()
    if problems:
        raise ValueError("; ".join(problems))
    names = _Names(afa.states)
    prime = {q: names.fresh(q + "'") for q in afa.states}
    p, p_prime, r = names.fresh("p"), names.fresh("p'"), names.fresh("r")
    a, half, third = GADGET_ACTION, Fraction(1, 2), Fraction(1, 3)
    rules, auxiliary = [], []

    def rule(state, symbol, *targets):
        rules.append(Rule(state, symbol, a,
                          Distribution(((s, tuple(w)), pr) for pr, s, w in targets)))

    def aux(name):
        state = names.fresh(name)
        auxiliary.append(state)
        return state

    for q in afa.states:
        if q in afa.accepting:
            rule(q, "Z", (1, r, "Z"))

    s1 = s2 = None
    if any(kind == "or" for kind, _, _ in afa.delta.values()):
        s1, s2 = aux("s1"), aux("s2")
        rule(s1, "X", (half, s1, "X"), (half, r, ""))
        rule(s2, "X", (Fraction(2, 5), s2, "X"), (Fraction(3, 5), r, ""))

    for q in afa.states:
        kind, q1, q2 = afa.delta[q]
        if kind == "or":
            r1, r2 = aux(f"r1[{q}]"), aux(f"r2[{q}]")
            r1p, r2p = aux(f"r1'[{q}]"), aux(f"r2'[{q}]")
            rule(q, "X", (half, r1, "X"), (half, r2, "X"))
            rule(prime[q], "X", (half, r1p, "X"), (half, r2p, "X"))
            rule(r1, "X", (half, q1, ""), (half, s1, "X"))
            rule(r2, "X", (half, q2, ""), (half, s2, "X"))
            rule(r1p, "X", (half, prime[q1], ""), (half, s1, "X"))
            rule(r2p, "X", (half, prime[q2], ""), (half, s2, "X"))
        else:
            u12, u1p2p, u12p, u1p2 = (aux(name) for name in or_gadget_states(q))
            rule(q, "X", (half, u12, "X"), (half, u1p2p, "X"))
            rule(prime[q], "X", (half, u12p, "X"), (half, u1p2, "X"))
            rule(u12, "X", (half, q1, ""), (half, q2, ""))
            rule(u1p2p, "X", (half, prime[q1], ""), (half, prime[q2], ""))
            rule(u12p, "X", (half, q1, ""), (half, prime[q2], ""))
            rule(u1p2, "X", (half, prime[q1], ""), (half, q2, ""))

    rule(p, "X", (third, p, "XX"), (third, afa.initial, ""), (third, r, "X"))
    rule(p_prime, "X", (third, p_prime, "XX"), (third, prime[afa.initial], ""), (third, r, "X"))

    states = (p, p_prime, r, *afa.states, *(prime[q] for q in afa.states), *auxiliary)
    spec = PpdaSpec(states, ("X", "Z"), (a,), tuple(rules))
    logger.info(f"AFA with {len(afa.states)} state(s) gives a pOCA with {len(states)} states "
                f"and {len(rules)} rules")
    return AfaPoca(spec, p, p_prime, prime)


# Pushdown reachability games


class Winner(Enum):
    PLAYER0_WINS = "PLAYER0_WINS"
    PLAYER1_WINS = "PLAYER1_WINS"
    UNRESOLVED = "UNRESOLVED"


@dataclass
class PushdownGame:
    """Player 1 wants to reach a dead configuration; states outside owner1 belong to Player 0."""

    spec: PpdaSpec
    owner0: frozenset
    owner1: frozenset
    initial: tuple

    @property
    def start(self):
        return Configuration(self.initial[0], (self.initial[1],))

    def owner(self, state):
        return 1 if state in self.owner1 else 0

    def successors(self, configuration):
        if configuration.is_empty:
            return ()
        targets = {}
        for rule in self.spec.rules_for(configuration.state, configuration.top):
            for state, word in rule.distribution:
                targets[configuration.replace_top(state, word)] = None
        return tuple(targets)

    def problems(self):
        found = []
        spec = self.spec
        if len(spec.actions) != 1:
            found.append(f"game must be unary, has {len(spec.actions)} action(s)")
        if self.owner0 & self.owner1:
            found.append(f"states owned by both players: {' '.join(sorted(self.owner0 & self.owner1))}")
        for state in sorted((self.owner0 | self.owner1) - set(spec.states)):
            found.append(f"owner lists undeclared state {state!r}")
        if self.initial[0] not in spec.states or self.initial[1] not in spec.stack_alphabet:
            found.append(f"initial head {self.initial[0]}{self.initial[1]} is not declared")
        for rule in spec.rules:
            if not rule.distribution.is_dirac():
                found.append(f"rule {rule.state} {rule.symbol} is probabilistic")
        for state, symbol in spec.heads():
            targets = {t for rule in spec.rules_for(state, symbol) for t in rule.distribution}
            if len(targets) > 2:
                found.append(f"head {state}{symbol} has {len(targets)} successors, at most 2 allowed")
            elif len(targets) == 2 and any(len(word) != 1 for _, word in targets):
                found.append(f"head {state}{symbol} branches into targets that do not replace the top symbol")
        return found


@dataclass(frozen=True)
class GameResult:
    winner: Winner
    depth: int = None
    explored: int = 0

    def __str__(self):
        if self.winner is Winner.PLAYER1_WINS:
            return f"PLAYER1_WINS({self.depth})"
        return self.winner.value


def game_graph(game, node_cap=None):
    """Reachable configuration graph as a networkx DiGraph; None when it passes node_cap."""
    node_cap = get_game_node_cap() if node_cap is None else node_cap
    graph = nx.DiGraph()
    graph.add_node(game.start)
    queue = deque([game.start])
    while queue:
        node = queue.popleft()
        for target in game.successors(node):
            if target not in graph:
                if graph.number_of_nodes() >= node_cap:
                    return None
                graph.add_node(target)
                queue.append(target)
            graph.add_edge(node, target)
    return graph


def attractor(game, graph):
    """Player 1's attractor of the dead nodes, with the number of rounds each node needs."""
    rank = {v: 0 for v in graph if graph.out_degree(v) == 0}
    remaining = {v: graph.out_degree(v) for v in graph}
    queue = deque(rank)
    while queue:
        node = queue.popleft()
        for u in graph.predecessors(node):
            if u in rank:
                continue
            if game.owner(u.state) == 1:
                rank[u] = rank[node] + 1
                queue.append(u)
            else:
                remaining[u] -= 1
                if remaining[u] == 0:
                    rank[u] = rank[node] + 1
                    queue.append(u)
    return rank


def _forces_dead(game, depth_bound, cap):
    memo = {}

    def forces(cfg, depth):
        key = (cfg, depth)
        if key in memo:
            return memo[key]
        successors = game.successors(cfg)
        if not successors:
            result = True
        elif depth == 0:
            result = False
        elif game.owner(cfg.state) == 1:
            result = any(forces(t, depth - 1) for t in successors)
        else:
            result = all(forces(t, depth - 1) for t in successors)
        memo[key] = result
        if len(memo) > cap:
            raise BudgetExceeded(f"bounded game search passed the cap of {cap} positions", cap=cap)
        return result

    for depth in range(depth_bound + 1):
        if forces(game.start, depth):
            return depth, len(memo)
    return None, len(memo)


def solve_game_bounded(game, depth_bound=32, node_cap=None, cap=None):
    """
    Exact attractor on the reachable graph when it is finite within node_cap;
    otherwise a depth-bounded search that can only confirm a Player 1 win.
    """
    graph = game_graph(game, node_cap)
    if graph is not None:
        rank = attractor(game, graph)
        if game.start in rank:
            return GameResult(Winner.PLAYER1_WINS, rank[game.start], graph.number_of_nodes())
        return GameResult(Winner.PLAYER0_WINS, None, graph.number_of_nodes())
    cap = get_exploration_cap() if cap is None else cap
    depth, explored = _forces_dead(game, depth_bound, cap)
    if depth is not None:
        return GameResult(Winner.PLAYER1_WINS, depth, explored)
    logger.warning(f"Game unresolved: infinite within the node cap and no Player 1 win within {depth_bound}")
    return GameResult(Winner.UNRESOLVED, None, explored)


ACTION_BY_PUSH = {0: "a_r", 1: "a_int", 2: "a_c"}


class GamePvpda(NamedTuple):
    spec: PpdaSpec
    left: Configuration
    right: Configuration


def game_to_pvpda(game):
    """
    Fully probabilistic pvPDA in which p0X0 ~ p0'X0 iff Player 0 wins.
    Player 0 branching becomes an OR-gadget, Player 1 branching an AND-gadget
    whose second branch leaks half its mass to the dead state z.
    """
    problems = game.problems()
    if problems:
        raise ShapeError("; ".join(problems))
    spec = game.spec
    names = _Names(spec.states)
    prime = {p: names.fresh(p + "'") for p in spec.states}
    z = names.fresh("z")
    a_r, a_int, a_c = (ACTION_BY_PUSH[k] for k in (0, 1, 2))
    half = Fraction(1, 2)
    rules, gadget_states, defined = [], [], set()

    def add(state, symbol, action, *targets):
        if (state, symbol) in defined:
            return
        defined.add((state, symbol))
        rules.append(Rule(state, symbol, action,
                          Distribution(((s, tuple(w)), pr) for pr, s, w in targets)))

    def gadget(name):
        if name not in names.taken:
            names.taken.add(name)
            gadget_states.append(name)
        return name

    for p in spec.states:
        for symbol in spec.stack_alphabet:
            successors = sorted({t for rule in spec.rules_for(p, symbol) for t in rule.distribution})
            if not successors:
                add(p, symbol, a_int, (1, p, (symbol,)))
                add(prime[p], symbol, a_int, (1, z, (symbol,)))
            elif len(successors) == 1:
                (q, word), = successors
                action = ACTION_BY_PUSH[len(word)]
                add(p, symbol, action, (1, q, word))
                add(prime[p], symbol, action, (1, prime[q], word))
            elif game.owner(p) == 0:
                (p1, (x1,)), (p2, (x2,)) = successors
                pairs = {
                    "12": (p1, p2), "1'2'": (prime[p1], prime[p2]),
                    "12'": (p1, prime[p2]), "1'2": (prime[p1], p2),
                }
                u = {key: gadget(f"o[{l}:{x1},{r}:{x2}]") for key, (l, r) in pairs.items()}
                add(p, symbol, a_int, (half, u["12"], (symbol,)), (half, u["1'2'"], (symbol,)))
                add(prime[p], symbol, a_int, (half, u["12'"], (symbol,)), (half, u["1'2"], (symbol,)))
                for key, (l, r) in pairs.items():
                    add(u[key], symbol, a_int, (half, l, (x1,)), (half, r, (x2,)))
            else:
                (p1, (x1,)), (p2, (x2,)) = successors
                t1, t1p = gadget(f"a[{p1}:{x1}]"), gadget(f"a[{prime[p1]}:{x1}]")
                t2, t2p = gadget(f"b[{p2}:{x2}]"), gadget(f"b[{prime[p2]}:{x2}]")
                add(p, symbol, a_int, (half, t1, (symbol,)), (half, t2, (symbol,)))
                add(prime[p], symbol, a_int, (half, t1p, (symbol,)), (half, t2p, (symbol,)))
                add(t1, symbol, a_int, (1, p1, (x1,)))
                add(t1p, symbol, a_int, (1, prime[p1], (x1,)))
                add(t2, symbol, a_int, (half, p2, (x2,)), (half, z, (symbol,)))
                add(t2p, symbol, a_int, (half, prime[p2], (x2,)), (half, z, (symbol,)))

    states = (*spec.states, *(prime[p] for p in spec.states), z, *gadget_states)
    reduced = PpdaSpec(states, spec.stack_alphabet, (a_r, a_int, a_c), tuple(rules),
                       Visibility([a_r], [a_int], [a_c]))
    p0, x0 = game.initial
    logger.info(f"Game with {len(spec.states)} state(s) gives a pvPDA with {len(states)} states "
                f"and {len(rules)} rules")
    return GamePvpda(reduced, Configuration(p0, (x0,)), Configuration(prime[p0], (x0,)))
