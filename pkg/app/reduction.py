# app/reduction.py

import logging
from dataclasses import dataclass, field

import pandas as pd

from app.automata import Distribution, PpdaSpec, Rule, Subclass, Visibility, classify, render_rational, validate
from app.errors import NotVisibly, SupportTooLarge, UnvalidatedError
from app.semantics import bisim_depth
from app.utils import get_support_cap

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

HASH = "#"
HASH_BY_PUSH = {0: "#_r", 1: "#_int", 2: "#_c"}


@dataclass(frozen=True)
class WeightSet:
    """Masses d(A) of the nonempty subsets A of every rule's support."""

    weights: frozenset
    max_support: int

    def __iter__(self):
        return iter(sorted(self.weights))

    def __len__(self):
        return len(self.weights)

    def __contains__(self, value):
        return value in self.weights


def _ordered_support(rule):
    return sorted(rule.distribution)


def _check_support(spec, cap):
    cap = get_support_cap() if cap is None else cap
    for i, rule in enumerate(spec.rules):
        if len(rule.distribution) > cap:
            raise SupportTooLarge(
                f"rule {i} ({rule.state} {rule.symbol} {rule.action}) has support "
                f"{len(rule.distribution)} > cap {cap}", rule=i, cap=cap)


def _subsets(targets):
    """Nonempty subsets as (bitmask, members) over a fixed target order."""
    for mask in range(1, 1 << len(targets)):
        yield mask, [t for bit, t in enumerate(targets) if mask >> bit & 1]


def compute_weights(spec, support_cap=None):
    _check_support(spec, support_cap)
    weights, widest = set(), 0
    for rule in spec.rules:
        targets = _ordered_support(rule)
        widest = max(widest, len(targets))
        for _, members in _subsets(targets):
            weights.add(rule.distribution.mass(members))
    return WeightSet(frozenset(weights), widest)


def _fresh(name, taken):
    while name in taken:
        name += "'"
    taken.add(name)
    return name


@dataclass(frozen=True)
class ReducedPda:
    spec: PpdaSpec
    source: PpdaSpec
    weights: WeightSet
    distribution_symbols: dict = field(default_factory=dict)
    subset_symbols: dict = field(default_factory=dict)
    weight_actions: dict = field(default_factory=dict)
    hash_actions: tuple = (HASH,)
    visibly: bool = False

    def is_new_symbol(self, symbol):
        return symbol in self.distribution_symbols or symbol in self.subset_symbols


def _require_valid(spec):
    report = validate(spec)
    if not report.ok:
        raise UnvalidatedError(f"spec is not well-formed ({len(report.issues)} issue(s))",
                               issues=report.lines())


def _build(spec, support_cap, visibly):
    _require_valid(spec)
    weights = compute_weights(spec, support_cap)
    taken_symbols = set(spec.stack_alphabet)
    taken_actions = set(spec.actions)
    weight_actions = {_fresh(render_rational(w), taken_actions): w for w in weights}
    if visibly:
        hash_of = {push: _fresh(name, taken_actions) for push, name in HASH_BY_PUSH.items()}
        hash_actions = tuple(hash_of[k] for k in sorted(hash_of))
    else:
        plain = _fresh(HASH, taken_actions)
        hash_of = {0: plain, 1: plain, 2: plain}
        hash_actions = (plain,)

    distribution_symbols, subset_symbols, new_symbols = {}, {}, []
    pick, match, element = [], [], []
    for i, rule in enumerate(spec.rules):
        d_symbol = _fresh(f"<d{i}>", taken_symbols)
        distribution_symbols[d_symbol] = i
        new_symbols.append(d_symbol)
        q = rule.state
        pick.append(Rule(q, rule.symbol, rule.action, Distribution.dirac((q, (d_symbol,)))))
        targets = _ordered_support(rule)
        for mask, members in _subsets(targets):
            t_symbol = _fresh(f"<d{i}:{mask}>", taken_symbols)
            subset_symbols[t_symbol] = (i, frozenset(members))
            new_symbols.append(t_symbol)
            mass = rule.distribution.mass(members)
            for name, w in weight_actions.items():
                if w <= mass:
                    match.append(Rule(q, d_symbol, name, Distribution.dirac((q, (t_symbol,)))))
            for target_state, word in members:
                element.append(Rule(q, t_symbol, hash_of[len(word)],
                                    Distribution.dirac((target_state, word))))

    visibility = None
    if visibly:
        visibility = Visibility(
            returns=[hash_of[0]],
            internals=list(spec.actions) + list(weight_actions) + [hash_of[1]],
            calls=[hash_of[2]],
        )
    reduced = PpdaSpec(
        states=spec.states,
        stack_alphabet=tuple(spec.stack_alphabet) + tuple(new_symbols),
        actions=tuple(spec.actions) + tuple(weight_actions) + hash_actions,
        rules=tuple(pick + match + element),
        visibility=visibility,
    )
    logger.info(f"Reduced {len(spec.rules)} rules to {len(reduced.rules)} "
                f"({len(weights)} weights, {len(new_symbols)} new stack symbols)")
    return ReducedPda(reduced, spec, weights, distribution_symbols, subset_symbols,
                      weight_actions, hash_actions, visibly)


def build_reduced(spec, support_cap=None):
    """
    Encode probabilities as actions: qX -a-> q<d>, q<d> -w-> q<T> for
    w <= d(T), q<T> -#-> p alpha for p alpha in T. The result is Dirac-only.
    """
    return _build(spec, support_cap, visibly=False)


def build_reduced_visibly(spec, support_cap=None):
    """As build_reduced, with # split into #_r/#_int/#_c by the push length."""
    if Subclass.PVPDA not in classify(spec):
        raise NotVisibly("spec is not a visibly pPDA")
    return _build(spec, support_cap, visibly=True)


def cross_validate(spec, c1, c2, n, cap=None, reduced=None):
    """c1 ~_n c2 in the spec iff c1 ~_3n c2 in its reduction."""
    if c1.is_empty or c2.is_empty:
        raise ValueError("cross-validation needs configurations with nonempty stacks")
    reduced = reduced or build_reduced(spec)
    original = bisim_depth(spec, c1, c2, n, cap)
    tripled = bisim_depth(reduced.spec, c1, c2, 3 * n, cap)
    agree = original.equivalent == tripled.equivalent
    if not agree:
        logger.warning(f"Reduction disagreement on {c1}, {c2}: {original} vs {tripled} at 3n")
    return agree


def reduction_stats(reduced):
    source, target = reduced.source, reduced.spec
    per_action = {}
    for rule in target.rules:
        per_action[rule.action] = per_action.get(rule.action, 0) + 1
    return {
        "Stack Symbols": len(source.stack_alphabet),
        "Reduced Stack Symbols": len(target.stack_alphabet),
        "Actions": len(source.actions),
        "Reduced Actions": len(target.actions),
        "Weights": len(reduced.weights),
        "Max Support": reduced.weights.max_support,
        "Rules": len(source.rules),
        "Reduced Rules": len(target.rules),
        "Rules Per Action": per_action,
    }


def size_report(reduced):
    """Measured sizes next to their bounds, one row per quantity."""
    stats = reduction_stats(reduced)
    rho, m = stats["Rules"], stats["Max Support"]
    per_action = stats["Rules Per Action"]
    hash_extra = len(reduced.hash_actions)
    rows = [
        ("Stack symbols", stats["Reduced Stack Symbols"],
         stats["Stack Symbols"] + rho + rho * 2 ** m),
        ("Actions", stats["Reduced Actions"], stats["Actions"] + stats["Weights"] + hash_extra),
        ("Weights", stats["Weights"], rho * 2 ** m),
        ("Hash rules", sum(per_action.get(h, 0) for h in reduced.hash_actions), rho * 2 ** m * m),
    ]
    for action in reduced.source.actions:
        rows.append((f"Rules under {action}", per_action.get(action, 0), rho))
    for name in reduced.weight_actions:
        rows.append((f"Rules under weight {name}", per_action.get(name, 0), rho * 2 ** m))
    return [
        {"Quantity": q, "Measured": measured, "Bound": bound, "Within Bound": measured <= bound}
        for q, measured, bound in rows
    ]


def size_bound_violations(reduced):
    return [row for row in size_report(reduced) if not row["Within Bound"]]


def size_table(reduced):
    return pd.DataFrame(size_report(reduced))


def delta_configuration(configuration, reduced):
    """True when the configuration only uses symbols of the source automaton."""
    return all(not reduced.is_new_symbol(x) for x in configuration.stack)
