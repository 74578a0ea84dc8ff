# app/difftest.py

import itertools
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction

import pandas as pd

from app.automata import (
    Configuration, Distribution, PltsBuilder, PpdaSpec, Rule, Visibility, as_nondeterministic,
)
from app.errors import BudgetExceeded
from app.hardness_gadgets import (
    OneLetterAfa, PushdownGame, Winner, acc_oracle, afa_to_poca, build_and_gadget, build_or_gadget,
    game_to_pvpda, solve_game_bounded,
)
from app.oca_analysis import CounterAnalysis, GridPoint, consistency_check, counter_configuration, counter_value
from app.reduction import build_reduced, build_reduced_visibly, cross_validate, size_bound_violations
from app.semantics import (
    Partition, bisim_depth, bisimulation_partition, decide_reachable, lemma1_check, r_equivalent,
    search_distinguishing_depth,
)
from app.vpda_decision import (
    decide_vpda, game_member, head_pairs, largest_forcing, local_forcing_probabilistic, soundness_report,
)

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SUITES = ("lemma1", "reduction", "forcing", "afa", "game", "gadgets", "poca")
DEFAULT_SUITE_CAP = 50_000


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    skipped: int = 0
    mismatches: list = field(default_factory=list)

    def mismatch(self, description):
        logger.warning(f"[{self.name}] mismatch: {description}")
        self.mismatches.append(description)

    def as_row(self):
        return {"Suite": self.name, "Checked": self.checked, "Skipped": self.skipped,
                "Mismatches": len(self.mismatches)}


# Generators


def random_distribution(rng, elements, max_support):
    support = rng.sample(list(elements), rng.randint(1, min(max_support, len(elements))))
    weights = [rng.randint(1, 4) for _ in support]
    total = sum(weights)
    return Distribution((e, Fraction(w, total)) for e, w in zip(support, weights))


def random_partition(rng, elements):
    blocks = {}
    for element in elements:
        blocks.setdefault(rng.randint(0, len(elements) - 1), []).append(element)
    return Partition.from_blocks([tuple(members) for _, members in sorted(blocks.items())])


def _respread(rng, d, partition):
    """A distribution with the same mass as d on every block of the partition."""
    entries = []
    for members in partition.blocks():
        mass = d.mass(members)
        if mass:
            chosen = rng.sample(list(members), rng.randint(1, len(members)))
            weights = [rng.randint(1, 3) for _ in chosen]
            entries += [(s, mass * Fraction(w, sum(weights))) for s, w in zip(chosen, weights)]
    return Distribution(entries)


def _probabilities(rng, size):
    if size == 1:
        return [Fraction(1)]
    weights = [rng.randint(1, 3) for _ in range(size)]
    return [Fraction(w, sum(weights)) for w in weights]


def _random_targets(rng, states, word_choices, max_support):
    size = rng.randint(1, max_support)
    targets = {(rng.choice(states), rng.choice(word_choices)) for _ in range(size)}
    return Distribution(zip(sorted(targets), _probabilities(rng, len(targets))))


def _words(symbols, length):
    return [tuple(w) for w in itertools.product(symbols, repeat=length)]


def random_ppda(rng, max_states=3, max_symbols=3, max_actions=2, max_support=3, density=0.5):
    states = tuple(f"p{i}" for i in range(rng.randint(1, max_states)))
    symbols = tuple("XYW"[:rng.randint(1, max_symbols)])
    actions = tuple("ab"[:rng.randint(1, max_actions)])
    words = [w for length in range(3) for w in _words(symbols, length)]
    rules = []
    for state in states:
        for symbol in symbols:
            for action in actions:
                for _ in range(2 if rng.random() < 0.2 else 1):
                    if rng.random() < density:
                        rules.append(Rule(state, symbol, action,
                                          _random_targets(rng, states, words, max_support)))
    return PpdaSpec(states, symbols, actions, tuple(rules))


VISIBLY_ACTIONS = {"r": 0, "i": 1, "c": 2}


def random_pvpda(rng, max_states=2, max_symbols=2, probabilistic=True, density=0.45):
    states = tuple(f"p{i}" for i in range(rng.randint(1, max_states)))
    symbols = tuple("XY"[:rng.randint(1, max_symbols)])
    rules = []
    for state in states:
        for symbol in symbols:
            for action, push in VISIBLY_ACTIONS.items():
                for _ in range(2 if rng.random() < 0.15 else 1):
                    if rng.random() < density:
                        support = 2 if probabilistic else 1
                        rules.append(Rule(state, symbol, action,
                                          _random_targets(rng, states, _words(symbols, push), support)))
    return PpdaSpec(states, symbols, tuple(VISIBLY_ACTIONS), tuple(rules), Visibility(["r"], ["i"], ["c"]))


def random_poca(rng, max_states=3, max_support=2, density=0.6):
    states = tuple(f"p{i}" for i in range(rng.randint(1, max_states)))
    rules = []
    for state in states:
        if rng.random() < density:
            rules.append(Rule(state, "X", "a", _random_targets(rng, states, [(), ("X",), ("X", "X")], max_support)))
        if rng.random() < density:
            rules.append(Rule(state, "Z", "a", _random_targets(rng, states, [("Z",), ("X", "Z")], max_support)))
        if rng.random() < 0.3:
            rules.append(Rule(state, "X", "b", _random_targets(rng, states, [(), ("X",)], 1)))
    return PpdaSpec(states, ("X", "Z"), ("a", "b"), tuple(rules))


def random_plts(rng, max_states=6, actions=("a", "b"), max_support=2):
    ctx = PltsBuilder([f"s{i}" for i in range(rng.randint(2, max_states))], actions)
    for state in list(ctx.states):
        for action in actions:
            if rng.random() < 0.5:
                ctx.add_transition(state, action, random_distribution(rng, ctx.states, max_support))
    return ctx.build()


def random_afa(rng, size):
    states = tuple(f"q{i}" for i in range(size))
    delta = {q: (rng.choice(("and", "or")), rng.choice(states), rng.choice(states)) for q in states}
    accepting = frozenset(q for q in states if rng.random() < 0.5)
    return OneLetterAfa(states, states[0], accepting, delta)


def all_afas(size):
    """Every AFA over q0..q{size-1}: all transition functions and accepting sets."""
    states = tuple(f"q{i}" for i in range(size))
    choices = [(kind, q1, q2) for kind in ("and", "or") for q1 in states for q2 in states]
    for transitions in itertools.product(choices, repeat=size):
        for bits in itertools.product((False, True), repeat=size):
            accepting = frozenset(q for q, b in zip(states, bits) if b)
            yield OneLetterAfa(states, states[0], accepting, dict(zip(states, transitions)))


def random_game(rng, max_states=2, push_rate=0.15):
    """Unary game over {X, Z}; Z stays at the bottom so stacks never empty."""
    states = tuple(f"g{i}" for i in range(rng.randint(1, max_states)))
    rules = []

    def rule(state, symbol, target_state, word):
        rules.append(Rule(state, symbol, "a", Distribution.dirac((target_state, word))))

    for state in states:
        for symbol, plain, push in (("Z", [("Z",)], ("X", "Z")), ("X", [(), ("X",)], ("X", "X"))):
            roll = rng.random()
            if roll < 0.25:
                continue
            if roll < 0.6 or len(states) < 2:
                word = push if rng.random() < push_rate else rng.choice(plain)
                rule(state, symbol, rng.choice(states), word)
            else:
                for target in rng.sample(states, 2):
                    rule(state, symbol, target, (symbol,))
    spec = PpdaSpec(states, ("X", "Z"), ("a",), tuple(rules))
    owner1 = frozenset(s for s in states if rng.random() < 0.5)
    return PushdownGame(spec, frozenset(states) - owner1, owner1, (states[0], "Z"))


# Suites


def _pair_configurations(rng, spec):
    def one():
        return Configuration(rng.choice(spec.states),
                             tuple(rng.choice(spec.stack_alphabet) for _ in range(rng.randint(1, 2))))
    return one(), one()


def suite_lemma1(rng, count, cap=None):
    result = SuiteResult("lemma1")
    elements = [f"e{i}" for i in range(6)]
    for _ in range(count):
        partition = random_partition(rng, elements)
        d = random_distribution(rng, elements, 5)
        e = _respread(rng, d, partition) if rng.random() < 0.5 else random_distribution(rng, elements, 5)
        result.checked += 1
        if lemma1_check(d, e, partition) != r_equivalent(d, e, partition):
            result.mismatch(f"{d!r} vs {e!r} on {partition.blocks()}")
    return result


def suite_reduction(rng, count, cap=None, max_n=3):
    result = SuiteResult("reduction")
    for _ in range(count):
        spec = random_ppda(rng)
        reduced = build_reduced(spec)
        violations = size_bound_violations(reduced)
        if violations:
            result.mismatch(f"size bounds violated: {[v['Quantity'] for v in violations]}")
        c1, c2 = _pair_configurations(rng, spec)
        n = rng.randint(0, max_n)
        try:
            agree = cross_validate(spec, c1, c2, n, cap, reduced)
        except BudgetExceeded:
            result.skipped += 1
            continue
        result.checked += 1
        if not agree:
            result.mismatch(f"{c1} vs {c2} at depth {n}")
    return result


def _check_agreement(rng, spec, result):
    reduced = build_reduced_visibly(spec)
    source = rng.choice(head_pairs(spec))
    action = rng.choice(sorted(spec.visibility.actions()))
    relation = local_forcing_probabilistic(spec, action, reduced, [source])
    candidates = [list(relation.universe.elements(m)) for m in relation.get(source)]
    pool = list(relation.universe.elements((1 << len(relation.universe)) - 1))
    for minimal in list(candidates):
        if minimal:
            candidates.append(minimal[1:])
    candidates.append([x for x in pool if rng.random() < 0.5])
    candidates.append([])
    for targets in candidates:
        if relation.member(source, targets) != game_member(spec, action, source, targets, reduced):
            result.mismatch(f"composition and game search disagree on {source} under {action}")
            return


def suite_forcing(rng, count, cap=None, depth=8, search_limit=32):
    result = SuiteResult("forcing")
    for _ in range(count):
        probabilistic = rng.random() < 0.5
        spec = random_pvpda(rng, probabilistic=probabilistic)
        try:
            forcing = largest_forcing(spec)
            if forcing.probabilistic:
                _check_agreement(rng, spec, result)
            else:
                report = soundness_report(spec, forcing)
                for source, targets in report["Failures"]:
                    result.mismatch(f"unsound forcing entry {source} -> {sorted(map(str, targets))}")
            left = Configuration(rng.choice(spec.states), (rng.choice(spec.stack_alphabet),))
            right = Configuration(rng.choice(spec.states),
                                  tuple(rng.choice(spec.stack_alphabet) for _ in range(rng.randint(1, 2))))
            decision = decide_vpda(spec, left, right, forcing)
            if decision.bisimilar:
                verdict = bisim_depth(spec, left, right, depth, cap)
                if not verdict.equivalent:
                    result.mismatch(f"{left} vs {right}: BISIMILAR but {verdict}")
            elif search_distinguishing_depth(spec, left, right, search_limit, cap) is None:
                result.mismatch(f"{left} vs {right}: NOT_BISIMILAR but equivalent up to {search_limit}")
        except BudgetExceeded:
            result.skipped += 1
            continue
        result.checked += 1
    return result


def check_afa(afa, max_n, cap=None):
    """Pairs (q, n) where Acc(q, n) does not match qX^nZ !~ q'X^nZ."""
    encoded = afa_to_poca(afa)
    wrong = []
    for q in afa.states:
        for n in range(max_n + 1):
            same = decide_reachable(encoded.spec, counter_configuration(q, n),
                                    counter_configuration(encoded.primes[q], n), cap)
            if same is None or same == acc_oracle(afa, q, n):
                wrong.append((q, n))
    return wrong


def suite_afa(rng, count, cap=None, max_n=5):
    result = SuiteResult("afa")
    for _ in range(count):
        afa = random_afa(rng, rng.randint(1, 3))
        result.checked += 1
        for q, n in check_afa(afa, max_n, cap):
            result.mismatch(f"Acc({q}, {n}) disagrees with bisimilarity")
    return result


def suite_game(rng, count, cap=None):
    result = SuiteResult("game")
    for _ in range(count):
        game = random_game(rng)
        solved = solve_game_bounded(game, depth_bound=12, node_cap=200)
        if solved.winner is Winner.UNRESOLVED:
            result.skipped += 1
            continue
        encoded = game_to_pvpda(game)
        expected = solved.winner is Winner.PLAYER0_WINS
        result.checked += 1
        for spec in (encoded.spec, as_nondeterministic(encoded.spec)):
            decision = decide_vpda(spec, encoded.left, encoded.right)
            if decision.bisimilar != expected:
                result.mismatch(f"game won by {solved} but reduction says {decision}")
    return result


GADGET_POOL = ("x", "y", "y2", "w", "v")


def _gadget_leaves():
    ctx = PltsBuilder()
    ctx.add_state("x")
    for loop in ("y", "y2"):
        ctx.add_transition(loop, "b", Distribution.dirac(loop))
    ctx.add_transition("w", "c", Distribution.dirac("w"))
    ctx.add_transition("v", "b", Distribution.half("y", "x"))
    return ctx


def suite_gadgets(rng=None, count=None, cap=None):
    """Every choice of t1, t1', t2, t2' from a pool of leaves, for both gadgets."""
    result = SuiteResult("gadgets")
    leaves = bisimulation_partition(_gadget_leaves().build())
    for t1, t1p, t2, t2p in itertools.product(GADGET_POOL, repeat=4):
        both = leaves.same(t1, t1p), leaves.same(t2, t2p)
        for kind, build, expected in (("and", build_and_gadget, all(both)),
                                      ("or", build_or_gadget, any(both))):
            if kind == "and" and leaves.same(t1, t2p):
                result.skipped += 1
                continue
            ctx = _gadget_leaves()
            build(ctx, "s", "s'", t1, t1p, t2, t2p)
            result.checked += 1
            if bisimulation_partition(ctx.build()).same("s", "s'") != expected:
                result.mismatch(f"{kind}-gadget on {t1}, {t1p}, {t2}, {t2p}")
    return result


def _relation_of(partition):
    return {(s, t) for members in partition.blocks() for s in members for t in members}


def suite_poca(rng, count, cap=None):
    result = SuiteResult("poca")
    for _ in range(count):
        spec = random_poca(rng)
        k = len(spec.states)
        try:
            analysis = CounterAnalysis(spec, cap=cap)
            for configuration in analysis.inc:
                if counter_value(configuration)[1] >= k:
                    result.mismatch(f"INC member {configuration} has counter >= {k}")
            point = GridPoint(rng.randint(0, 3), rng.randint(0, 3), rng.choice(spec.states), rng.choice(spec.states))
            if not analysis.dist(point.p, point.m).finite and not analysis.dist(point.q, point.n).finite:
                s, t = point.configurations()
                if bisim_depth(spec, s, t, k, cap).equivalent != bisim_depth(spec, s, t, k + 5, cap).equivalent:
                    result.mismatch(f"~_{k} verdict on {s}, {t} changes by depth {k + 5}")
        except BudgetExceeded:
            result.skipped += 1
            continue

        plts = random_plts(rng)
        partition = bisimulation_partition(plts)
        fragment = plts.successor_map()
        if not consistency_check(fragment, _relation_of(partition)).consistent:
            result.mismatch("bisimulation partition rejected by the consistency check")
        blocks = partition.blocks()
        if len(blocks) > 1:
            first, second = rng.sample(blocks, 2)
            merged = Partition.from_blocks([b for b in blocks if b not in (first, second)] + [first + second])
            if consistency_check(fragment, _relation_of(merged)).consistent:
                result.mismatch("merged partition accepted by the consistency check")
        result.checked += 1
    return result


SUITE_RUNNERS = {
    "lemma1": suite_lemma1,
    "reduction": suite_reduction,
    "forcing": suite_forcing,
    "afa": suite_afa,
    "game": suite_game,
    "gadgets": suite_gadgets,
    "poca": suite_poca,
}


def run_difftest(seed, count, suites=None, cap=DEFAULT_SUITE_CAP):
    """Run the named suites (all by default) from one seeded generator."""
    rng = random.Random(seed)
    results = []
    for name in suites or SUITES:
        logger.info(f"Running difftest suite {name} (seed {seed}, count {count})")
        results.append(SUITE_RUNNERS[name](rng, count, cap))
    return results


def summary_table(results):
    return pd.DataFrame([r.as_row() for r in results], columns=["Suite", "Checked", "Skipped", "Mismatches"])
