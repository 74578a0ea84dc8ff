# app/automata.py

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property

from app.errors import UnvalidatedError

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

Rational = Fraction

MAX_PUSH = 2


def parse_rational(text):
    """
    Parse "num/den", an integer or an exact decimal literal into a Rational.
    Decimals are converted exactly, so "0.5" and "5/10" both give 1/2.
    """
    try:
        value = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a rational number: {text!r}") from e
    if value < 0:
        raise ValueError(f"negative rational: {text!r}")
    return value


def render_rational(value):
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class Distribution(Mapping):
    """
    Finite map from successor objects to positive rationals.
    Duplicate keys are merged by adding their masses. The sum-to-one
    requirement is checked by validate(), so malformed input can be reported.
    """

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries=()):
        merged = {}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for key, value in items:
            value = Fraction(value)
            if value <= 0:
                raise ValueError(f"non-positive mass {value} for {key!r}")
            merged[key] = merged.get(key, Fraction(0)) + value
        self._entries = merged
        self._hash = None

    @classmethod
    def dirac(cls, element):
        return cls([(element, 1)])

    @classmethod
    def half(cls, first, second):
        return cls([(first, Fraction(1, 2)), (second, Fraction(1, 2))])

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if isinstance(other, Distribution):
            return self._entries == other._entries
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __repr__(self):
        body = ", ".join(f"{k!r}: {render_rational(v)}" for k, v in self._entries.items())
        return f"Distribution({{{body}}})"

    def support(self):
        return frozenset(self._entries)

    def total(self):
        return sum(self._entries.values(), Fraction(0))

    def is_dirac(self):
        return len(self._entries) == 1 and next(iter(self._entries.values())) == 1

    def is_stochastic(self):
        return self.total() == 1

    def mass(self, subset):
        return sum((v for k, v in self._entries.items() if k in subset), Fraction(0))

    def map(self, fn):
        """Push the distribution forward along fn, merging colliding images."""
        return Distribution((fn(k), v) for k, v in self._entries.items())


@dataclass(frozen=True, order=True)
class Configuration:
    state: str
    stack: tuple = ()

    def __str__(self):
        return self.state + "".join(self.stack)

    @property
    def top(self):
        return self.stack[0] if self.stack else None

    @property
    def is_empty(self):
        return not self.stack

    def replace_top(self, state, word):
        return Configuration(state, tuple(word) + self.stack[1:])

    def extend(self, *symbols):
        """Append symbols below the current stack content."""
        return Configuration(self.state, self.stack + tuple(symbols))


@dataclass(frozen=True)
class Rule:
    """qX --a--> d where d ranges over (state, word) targets with |word| <= 2."""

    state: str
    symbol: str
    action: str
    distribution: Distribution

    @property
    def head(self):
        return (self.state, self.symbol)

    def targets(self):
        return list(self.distribution)


def make_rule(state, symbol, action, targets):
    """Build a rule from (probability, state, word) triples."""
    return Rule(state, symbol, action,
                Distribution(((s, tuple(w)), Fraction(p)) for p, s, w in targets))


class Visibility:
    """Partition of the actions into returns, internals and calls."""

    PUSH_LENGTH = {"r": 0, "int": 1, "c": 2}

    def __init__(self, returns=(), internals=(), calls=()):
        self.returns = frozenset(returns)
        self.internals = frozenset(internals)
        self.calls = frozenset(calls)

    def __eq__(self, other):
        return (isinstance(other, Visibility)
                and (self.returns, self.internals, self.calls)
                == (other.returns, other.internals, other.calls))

    def __hash__(self):
        return hash((self.returns, self.internals, self.calls))

    def __repr__(self):
        return (f"Visibility(returns={sorted(self.returns)}, internals={sorted(self.internals)}, "
                f"calls={sorted(self.calls)})")

    def kind(self, action):
        if action in self.returns:
            return "r"
        if action in self.internals:
            return "int"
        if action in self.calls:
            return "c"
        return None

    def actions(self):
        return self.returns | self.internals | self.calls


@dataclass(frozen=True)
class PpdaSpec:
    states: tuple
    stack_alphabet: tuple
    actions: tuple
    rules: tuple = ()
    visibility: Visibility = None

    @cached_property
    def _by_head(self):
        index = {}
        for rule in self.rules:
            index.setdefault(rule.head, []).append(rule)
        return {head: tuple(rules) for head, rules in index.items()}

    @cached_property
    def rule_index(self):
        return {rule: i for i, rule in enumerate(self.rules)}

    def rules_for(self, state, symbol, action=None):
        rules = self._by_head.get((state, symbol), ())
        if action is None:
            return rules
        return tuple(r for r in rules if r.action == action)

    def heads(self):
        return list(self._by_head)

    def is_dead(self, configuration):
        if configuration.is_empty:
            return True
        return not self.rules_for(configuration.state, configuration.top)

    def restrict(self, states, symbols):
        """Keep the rules whose head and every target stay inside states x symbols*."""
        states, symbols = set(states), set(symbols)
        kept = []
        for rule in self.rules:
            if rule.state not in states or rule.symbol not in symbols:
                continue
            if all(s in states and set(w) <= symbols for s, w in rule.distribution):
                kept.append(rule)
        return PpdaSpec(
            states=tuple(s for s in self.states if s in states),
            stack_alphabet=tuple(x for x in self.stack_alphabet if x in symbols),
            actions=self.actions,
            rules=tuple(kept),
            visibility=self.visibility,
        )


@dataclass(frozen=True)
class Plts:
    states: tuple
    actions: tuple
    transitions: tuple = ()

    @cached_property
    def _successors(self):
        table = {s: [] for s in self.states}
        for state, action, dist in self.transitions:
            table.setdefault(state, []).append((action, dist))
        return table

    def successors(self, state):
        return self._successors.get(state, [])

    def successor_map(self):
        return {s: list(v) for s, v in self._successors.items()}

    def is_fully_probabilistic(self):
        seen = set()
        for state, action, _ in self.transitions:
            if (state, action) in seen:
                return False
            seen.add((state, action))
        return True


class PltsBuilder:
    """Mutable pLTS under construction; the gadget builders write into it."""

    def __init__(self, states=(), actions=()):
        self.states = list(states)
        self.actions = list(actions)
        self._transitions = {}

    def add_state(self, state):
        if state not in self.states:
            self.states.append(state)
        return state

    def has_transitions(self, state):
        return bool(self._transitions.get(state))

    def add_transition(self, state, action, distribution):
        self.add_state(state)
        for target in distribution:
            self.add_state(target)
        if action not in self.actions:
            self.actions.append(action)
        self._transitions.setdefault(state, []).append((action, distribution))

    def build(self):
        transitions = tuple(
            (s, a, d) for s in self.states for a, d in self._transitions.get(s, ())
        )
        return Plts(tuple(self.states), tuple(self.actions), transitions)


@dataclass(frozen=True)
class ValidationIssue:
    location: str
    message: str

    def __str__(self):
        return f"{self.location}: {self.message}"


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.issues

    def add(self, location, message):
        self.issues.append(ValidationIssue(location, message))

    def lines(self):
        return [str(issue) for issue in self.issues]


def _rule_location(index, rule):
    return f"rule {index} ({rule.state} {rule.symbol} {rule.action})"


def validate(spec):
    """
    Check every well-formedness condition of a pPDA.
    Returns a ValidationReport; the report is empty iff the spec is well-formed.
    """
    report = ValidationReport()
    states, symbols, actions = set(spec.states), set(spec.stack_alphabet), set(spec.actions)
    for kind, declared in (("state", spec.states), ("stack symbol", spec.stack_alphabet),
                           ("action", spec.actions)):
        if len(set(declared)) != len(declared):
            report.add("header", f"duplicate {kind} declaration")

    for i, rule in enumerate(spec.rules):
        where = _rule_location(i, rule)
        if rule.state not in states:
            report.add(where, f"undeclared state {rule.state!r}")
        if rule.symbol not in symbols:
            report.add(where, f"undeclared stack symbol {rule.symbol!r}")
        if rule.action not in actions:
            report.add(where, f"undeclared action {rule.action!r}")
        if not rule.distribution:
            report.add(where, "empty distribution")
            continue
        total = rule.distribution.total()
        if total != 1:
            report.add(where, f"probabilities sum to {render_rational(total)}, not 1")
        for target_state, word in rule.distribution:
            if target_state not in states:
                report.add(where, f"undeclared target state {target_state!r}")
            undeclared = [x for x in word if x not in symbols]
            if undeclared:
                report.add(where, f"undeclared stack symbol(s) {' '.join(undeclared)} in target")
            if len(word) > MAX_PUSH:
                report.add(where, f"pushes {len(word)} symbols; at most {MAX_PUSH} allowed")

    if spec.visibility is not None:
        vis = spec.visibility
        overlap = ((vis.returns & vis.internals) | (vis.returns & vis.calls)
                   | (vis.internals & vis.calls))
        if overlap:
            report.add("visibility", f"actions in more than one class: {' '.join(sorted(overlap))}")
        missing = actions - vis.actions()
        if missing:
            report.add("visibility", f"actions without a class: {' '.join(sorted(missing))}")
        extra = vis.actions() - actions
        if extra:
            report.add("visibility", f"undeclared actions: {' '.join(sorted(extra))}")
    return report


class Subclass(Enum):
    PBPA = "pBPA"
    POCA = "pOCA"
    PVPDA = "pvPDA"
    FULLY_PROBABILISTIC = "fullyProbabilistic"
    NONDETERMINISTIC = "nondeterministic"


def is_dirac_only(spec):
    return all(rule.distribution.is_dirac() for rule in spec.rules)


def is_fully_probabilistic(spec):
    seen = set()
    for rule in spec.rules:
        key = (rule.state, rule.symbol, rule.action)
        if key in seen:
            return False
        seen.add(key)
    return True


def is_poca(spec):
    """X-rules push words over {X}; Z-rules push exactly Z or XZ."""
    if set(spec.stack_alphabet) != {"X", "Z"}:
        return False
    for rule in spec.rules:
        for _, word in rule.distribution:
            if rule.symbol == "X" and "Z" in word:
                return False
            if rule.symbol == "Z" and word not in (("Z",), ("X", "Z")):
                return False
    return True


def is_visibly(spec):
    vis = spec.visibility
    if vis is None:
        return False
    for rule in spec.rules:
        kind = vis.kind(rule.action)
        if kind is None:
            return False
        expected = Visibility.PUSH_LENGTH[kind]
        if any(len(word) != expected for _, word in rule.distribution):
            return False
    return True


def classify(spec):
    """Return the frozenset of Subclass flags that hold for a validated spec."""
    report = validate(spec)
    if not report.ok:
        raise UnvalidatedError(f"spec is not well-formed ({len(report.issues)} issue(s))",
                               issues=report.lines())
    flags = set()
    if len(spec.states) == 1:
        flags.add(Subclass.PBPA)
    if is_poca(spec):
        flags.add(Subclass.POCA)
    if is_visibly(spec):
        flags.add(Subclass.PVPDA)
    if is_fully_probabilistic(spec):
        flags.add(Subclass.FULLY_PROBABILISTIC)
    if is_dirac_only(spec):
        flags.add(Subclass.NONDETERMINISTIC)
    return frozenset(flags)


def as_nondeterministic(spec):
    """Replace each probabilistic rule by one Dirac rule per support element."""
    rules, seen = [], set()
    for rule in spec.rules:
        for target in rule.distribution:
            key = (rule.state, rule.symbol, rule.action, target)
            if key in seen:
                continue
            seen.add(key)
            rules.append(Rule(rule.state, rule.symbol, rule.action, Distribution.dirac(target)))
    return PpdaSpec(spec.states, spec.stack_alphabet, spec.actions, tuple(rules), spec.visibility)


EMBED_SYMBOL = "_"


def embed_plts(plts):
    """A finite pLTS as a pPDA: one stack symbol, never pushed or popped."""
    rules = tuple(
        Rule(state, EMBED_SYMBOL, action, dist.map(lambda t: (t, (EMBED_SYMBOL,))))
        for state, action, dist in plts.transitions
    )
    return PpdaSpec(tuple(plts.states), (EMBED_SYMBOL,), tuple(plts.actions), rules)


def embedded(state):
    return Configuration(state, (EMBED_SYMBOL,))
