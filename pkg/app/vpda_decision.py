# app/vpda_decision.py
#
# Forcing relations relate a pair of configurations to the sets of
# configuration pairs the Attacker can force the bisimulation game into
# (or win before). Families are upward closed, so only the minimal sets
# are stored: an antichain of int bitmasks over a Universe of pairs.

import functools
import logging
from dataclasses import dataclass, field

import pandas as pd
import yaml

from app.automata import Configuration, Subclass, Visibility, classify
from app.errors import NotPvpda, NotVpda, ShapeError
from app.reduction import build_reduced_visibly

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

BOTTOM = "⊥"


class Universe:
    """Growable index of element pairs; bit i of a mask stands for element i."""

    def __init__(self, elements=()):
        self._index = {}
        self._elements = []
        for element in elements:
            self.index(element)

    def __len__(self):
        return len(self._elements)

    def index(self, element):
        position = self._index.get(element)
        if position is None:
            position = len(self._elements)
            self._index[element] = position
            self._elements.append(element)
        return position

    def mask(self, elements):
        value = 0
        for element in elements:
            value |= 1 << self.index(element)
        return value

    def known_mask(self, elements):
        """Mask of the elements already indexed; unknown ones are in no stored set."""
        value = 0
        for element in elements:
            position = self._index.get(element)
            if position is not None:
                value |= 1 << position
        return value

    def elements(self, mask):
        while mask:
            low = mask & -mask
            yield self._elements[low.bit_length() - 1]
            mask ^= low


def _size(mask):
    return bin(mask).count("1")


def minimize(masks):
    """Minimal elements under inclusion, smallest first."""
    kept = []
    for mask in sorted(set(masks), key=lambda m: (_size(m), m)):
        if not any(k & mask == k for k in kept):
            kept.append(mask)
    return tuple(kept)


def is_antichain(masks):
    masks = list(masks)
    return all(a == b or a & b != a for a in masks for b in masks) and len(set(masks)) == len(masks)


@dataclass(frozen=True)
class AttackerMove:
    action: str
    side: str
    target: Configuration

    def __str__(self):
        return f"{self.side} {self.action} -> {self.target}"


@dataclass(frozen=True)
class Annotation:
    round: int
    move: AttackerMove


@dataclass
class ForcingRelation:
    universe: Universe
    entries: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def set(self, source, masks, provenance=None):
        kept = minimize(masks)
        if not kept:
            self.entries.pop(source, None)
            return
        self.entries[source] = kept
        if provenance:
            for mask in kept:
                if mask in provenance:
                    self.provenance[(source, mask)] = provenance[mask]

    def get(self, source):
        return self.entries.get(source, ())

    def __contains__(self, source):
        return source in self.entries

    def __len__(self):
        return len(self.entries)

    def size(self):
        return sum(len(masks) for masks in self.entries.values())

    def items(self):
        return self.entries.items()

    def witness(self, source, targets):
        """A minimal set included in targets, or None."""
        allowed = self.universe.known_mask(targets)
        for mask in self.get(source):
            if mask & allowed == mask:
                return mask
        return None

    def member(self, source, targets):
        return self.witness(source, targets) is not None

    def as_sets(self):
        return {
            source: frozenset(frozenset(self.universe.elements(m)) for m in masks)
            for source, masks in self.entries.items()
        }

    def covers(self, other):
        """Every (source, A) of other is a member of self (upward-closed inclusion)."""
        for source, masks in other.items():
            for mask in masks:
                if not self.member(source, other.universe.elements(mask)):
                    return False
        return True


def _pair_key(pair):
    return (str(pair[0]), str(pair[1]))


def reindex(relation, universe):
    result = ForcingRelation(universe)
    for source, masks in relation.items():
        mapped = {}
        for mask in masks:
            new = universe.mask(relation.universe.elements(mask))
            mapped.setdefault(new, relation.provenance.get((source, mask)))
        result.set(source, mapped, mapped)
    return result


def union(relations, universe):
    result = ForcingRelation(universe)
    gathered, provenance = {}, {}
    for relation in relations:
        for source, masks in relation.items():
            for mask in masks:
                new = universe.mask(relation.universe.elements(mask))
                gathered.setdefault(source, []).append(new)
                provenance.setdefault(source, {}).setdefault(new, relation.provenance.get((source, mask)))
    for source, masks in gathered.items():
        result.set(source, masks, provenance[source])
    return result


def lift_join(first, second):
    """
    first • second: for a minimal A of first and one minimal set of second per
    element of A, the union of the chosen sets. Elements of A outside second's
    domain make A useless; A = {} gives the empty set.
    """
    result = ForcingRelation(second.universe)
    for source, masks in first.items():
        candidates, provenance = [], {}
        for mask in masks:
            unions = (0,)
            for element in first.universe.elements(mask):
                options = second.get(element)
                if not options:
                    unions = ()
                    break
                unions = minimize(u | o for u in unions for o in options)
            for u in unions:
                candidates.append(u)
                provenance.setdefault(u, first.provenance.get((source, mask)))
        if candidates:
            result.set(source, candidates, provenance)
    return result


def gamma_shift(relation, stack_alphabet):
    """Append X below the left and Y below the right configuration, on sources and targets alike."""
    universe = Universe()
    result = ForcingRelation(universe)
    for x in stack_alphabet:
        for y in stack_alphabet:
            for (c, d), masks in relation.items():
                source = (c.extend(x), d.extend(y))
                provenance = {}
                shifted = []
                for mask in masks:
                    new = universe.mask((a.extend(x), b.extend(y))
                                        for a, b in relation.universe.elements(mask))
                    shifted.append(new)
                    provenance[new] = relation.provenance.get(((c, d), mask))
                result.set(source, shifted, provenance)
    return result


def head_pairs(spec, symbols=None):
    symbols = spec.stack_alphabet if symbols is None else symbols
    heads = [Configuration(p, (x,)) for p in spec.states for x in symbols]
    return [(left, right) for left in heads for right in heads]


def _moves(spec, configuration, action):
    if configuration.is_empty:
        return []
    return [
        configuration.replace_top(state, word)
        for rule in spec.rules_for(configuration.state, configuration.top, action)
        for state, word in rule.distribution
    ]


def _local(spec, action, sources, universe=None):
    universe = Universe() if universe is None else universe
    relation = ForcingRelation(universe)
    for left, right in sources:
        left_moves, right_moves = _moves(spec, left, action), _moves(spec, right, action)
        if not left_moves and not right_moves:
            continue
        masks, provenance = [], {}
        for target in left_moves:
            mask = universe.mask((target, response) for response in right_moves)
            masks.append(mask)
            provenance.setdefault(mask, AttackerMove(action, "left", target))
        for target in right_moves:
            mask = universe.mask((response, target) for response in left_moves)
            masks.append(mask)
            provenance.setdefault(mask, AttackerMove(action, "right", target))
        relation.set((left, right), masks, provenance)
    return relation


def _require_visibly(spec, flags, error):
    if Subclass.PVPDA not in flags:
        raise error("spec has no consistent visibility partition")


def local_forcing(spec, action, sources=None):
    """
    The one-step relation of a Dirac-only visibly PDA: one minimal set per
    Attacker move, holding the pairs the Defender can answer with.
    """
    flags = classify(spec)
    _require_visibly(spec, flags, NotVpda)
    if Subclass.NONDETERMINISTIC not in flags:
        raise NotVpda("spec has probabilistic rules; use local_forcing_probabilistic")
    if spec.visibility.kind(action) is None:
        raise NotVpda(f"action {action!r} has no visibility class")
    return _local(spec, action, head_pairs(spec) if sources is None else sources)


def _targets(relation):
    seen = {}
    for _, masks in relation.items():
        for mask in masks:
            for element in relation.universe.elements(mask):
                seen[element] = None
    return list(seen)


def _hash_for(reduced, action, source_visibility):
    return reduced.hash_actions[Visibility.PUSH_LENGTH[source_visibility.kind(action)]]


def _probabilistic(spec, action, reduced, sources):
    target = reduced.spec
    first = _local(target, action, sources)
    universe = Universe()
    middle = _targets(first)
    second = union([_local(target, w, middle, universe) for w in reduced.weight_actions], universe)
    last = _local(target, _hash_for(reduced, action, spec.visibility), _targets(second))
    return lift_join(lift_join(first, second), last)


def local_forcing_probabilistic(spec, action, reduced=None, sources=None):
    """
    One step of a pvPDA as three steps of its visibly reduction:
    the action itself, then any weight, then the matching #.
    """
    flags = classify(spec)
    _require_visibly(spec, flags, NotPvpda)
    if spec.visibility.kind(action) is None:
        raise NotPvpda(f"action {action!r} has no visibility class")
    reduced = reduced or build_reduced_visibly(spec)
    return _probabilistic(spec, action, reduced, head_pairs(spec) if sources is None else sources)


def game_member(spec, action, source, targets, reduced=None):
    """AND-OR search over the three reduced steps; the oracle for local_forcing_probabilistic."""
    flags = classify(spec)
    _require_visibly(spec, flags, NotPvpda)
    reduced = reduced or build_reduced_visibly(spec)
    system = reduced.spec
    stages = ((action,), tuple(reduced.weight_actions), (_hash_for(reduced, action, spec.visibility),))
    goal = set(targets)

    def attacker_wins(left, right, stage):
        if stage == len(stages):
            return (left, right) in goal
        for a in stages[stage]:
            left_moves, right_moves = _moves(system, left, a), _moves(system, right, a)
            for target in left_moves:
                if all(attacker_wins(target, r, stage + 1) for r in right_moves):
                    return True
            for target in right_moves:
                if all(attacker_wins(l, target, stage + 1) for l in left_moves):
                    return True
        return False

    return attacker_wins(source[0], source[1], 0)


@dataclass
class ForcingResult:
    relation: ForcingRelation
    rounds: int
    trace: list = field(default_factory=list)
    probabilistic: bool = False

    def annotation(self, source, mask):
        return self.relation.provenance.get((source, mask))


def round_bound(spec):
    q, g = len(spec.states), len(spec.stack_alphabet)
    return (q * g) ** 2 * 2 ** (q * q)


def _local_relations(spec, flags):
    if Subclass.NONDETERMINISTIC in flags:
        sources = head_pairs(spec)
        return {a: _local(spec, a, sources) for a in spec.visibility.actions()}, False
    reduced = build_reduced_visibly(spec)
    sources = head_pairs(spec)
    return {a: _probabilistic(spec, a, reduced, sources) for a in spec.visibility.actions()}, True


def empty_pairs(spec):
    return [(Configuration(p), Configuration(q)) for p in spec.states for q in spec.states]


def largest_forcing(spec):
    """
    Kleene iteration of F = U_r [a] u U_int [a].F u U_c [a].F/Gamma.F from the
    empty relation. Each new minimal set is annotated with its round and the
    Attacker's first move.
    """
    flags = classify(spec)
    if Subclass.PVPDA not in flags:
        raise NotVpda("spec has no consistent visibility partition")
    local, probabilistic = _local_relations(spec, flags)
    vis = spec.visibility
    universe = Universe(empty_pairs(spec))
    current = ForcingRelation(universe)
    trace, bound = [], round_bound(spec)

    for round_number in range(1, bound + 2):
        parts = [(a, reindex(local[a], universe)) for a in sorted(vis.returns)]
        parts += [(a, lift_join(local[a], current)) for a in sorted(vis.internals)]
        if vis.calls:
            shifted = gamma_shift(current, spec.stack_alphabet)
            parts += [(a, lift_join(lift_join(local[a], shifted), current)) for a in sorted(vis.calls)]
        following = _next_round(current, parts, round_number)
        trace.append({"Round": round_number, "Sources": len(following), "Minimal Sets": following.size()})
        if following.entries == current.entries:
            logger.info(f"Forcing relation stable after {round_number} round(s): "
                        f"{len(current)} source pair(s), {current.size()} minimal set(s)")
            return ForcingResult(current, round_number, trace, probabilistic)
        current = following
    raise RuntimeError(f"Kleene iteration did not stabilise within {bound} rounds")


def _next_round(current, parts, round_number):
    gathered, provenance = {}, {}
    for source, masks in current.items():
        gathered[source] = list(masks)
        provenance[source] = {m: current.provenance.get((source, m)) for m in masks}
    for _, relation in parts:
        for source, masks in relation.items():
            bucket = provenance.setdefault(source, {})
            for mask in masks:
                gathered.setdefault(source, []).append(mask)
                if mask not in bucket:
                    bucket[mask] = Annotation(round_number, relation.provenance.get((source, mask)))
    following = ForcingRelation(current.universe)
    for source, masks in gathered.items():
        following.set(source, masks, provenance[source])
    return following


@dataclass(frozen=True)
class VpdaDecision:
    verdict: str
    source: tuple = None
    witness: frozenset = None
    annotation: Annotation = None

    @property
    def bisimilar(self):
        return self.verdict == "BISIMILAR"

    def __str__(self):
        return self.verdict


def _decision_shape(left, right):
    if len(left.stack) != 1 and len(right.stack) == 1:
        left, right = right, left
    if len(left.stack) != 1 or right.is_empty:
        raise ShapeError(f"expected pX versus qY beta, got {left} and {right}")
    return left, right


def decide_vpda(spec, left, right, forcing=None):
    """
    pX and qY beta are not bisimilar iff (pX, qY) is forced into the pairs
    (p, q) where q beta can still move; with beta empty, into the empty set.
    """
    if left == right:
        return VpdaDecision("BISIMILAR")
    left, right = _decision_shape(left, right)
    forcing = forcing or largest_forcing(spec)
    beta = right.stack[1:]
    source = (left, Configuration(right.state, right.stack[:1]))
    targets = []
    if beta:
        targets = [(Configuration(p), Configuration(q)) for p in spec.states for q in spec.states
                   if not spec.is_dead(Configuration(q, beta))]
    witness = forcing.relation.witness(source, targets)
    if witness is None:
        logger.info(f"{left} and {right} are bisimilar (exact, forcing)")
        return VpdaDecision("BISIMILAR", source)
    elements = frozenset(forcing.relation.universe.elements(witness))
    logger.info(f"{left} and {right} are not bisimilar (exact, forcing)")
    return VpdaDecision("NOT_BISIMILAR", source, elements, forcing.annotation(source, witness))


def attacker_forces(spec, left, right, targets, max_steps):
    """
    Bounded game on a Dirac-only vPDA from (left⊥, right⊥): can the Attacker
    win, or empty both original stacks at a pair of states in targets, within max_steps?
    """
    goal = {(a.state, b.state) for a, b in targets}

    @functools.lru_cache(maxsize=None)
    def wins(l, r, steps):
        if l.stack == (BOTTOM,) and r.stack == (BOTTOM,):
            return (l.state, r.state) in goal
        if steps == 0:
            return False
        for action in sorted(spec.actions):
            left_moves, right_moves = _moves(spec, l, action), _moves(spec, r, action)
            for target in left_moves:
                if all(wins(target, response, steps - 1) for response in right_moves):
                    return True
            for target in right_moves:
                if all(wins(response, target, steps - 1) for response in left_moves):
                    return True
        return False

    return wins(left.extend(BOTTOM), right.extend(BOTTOM), max_steps)


def soundness_report(spec, forcing, step_limit=15):
    """
    Replay every minimal entry with attacker_forces; entries needing more than
    step_limit steps are skipped. Probabilistic relations are replayed on the
    visibly reduction, three reduced steps per step.
    """
    if forcing.probabilistic:
        system, scale, mode = build_reduced_visibly(spec).spec, 3, "reduced"
    else:
        system, scale, mode = spec, 1, "direct"
    checked, skipped, failures = 0, 0, []
    for source, masks in sorted(forcing.relation.items(), key=lambda item: _pair_key(item[0])):
        for mask in masks:
            annotation = forcing.annotation(source, mask)
            steps = 2 ** annotation.round - 1
            if steps > step_limit:
                skipped += 1
                continue
            targets = list(forcing.relation.universe.elements(mask))
            checked += 1
            if not attacker_forces(system, source[0], source[1], targets, steps * scale):
                failures.append((source, frozenset(targets)))
    return {"Mode": mode, "Checked": checked, "Skipped": skipped, "Failures": failures}


def _render_set(elements):
    return "{" + ", ".join(sorted(f"{a.state}{b.state}" for a, b in elements)) + "}"


def forcing_table(forcing):
    rows = []
    for source, masks in sorted(forcing.relation.items(), key=lambda item: _pair_key(item[0])):
        for mask in masks:
            annotation = forcing.annotation(source, mask)
            rows.append({
                "Left": str(source[0]),
                "Right": str(source[1]),
                "Minimal Set": _render_set(forcing.relation.universe.elements(mask)),
                "Round": annotation.round if annotation else None,
            })
    return pd.DataFrame(rows, columns=["Left", "Right", "Minimal Set", "Round"])


def annotations_to_yaml(forcing):
    entries = []
    for source, masks in sorted(forcing.relation.items(), key=lambda item: _pair_key(item[0])):
        for mask in masks:
            annotation = forcing.annotation(source, mask)
            entries.append({
                "source": f"{source[0]} {source[1]}",
                "forces": _render_set(forcing.relation.universe.elements(mask)),
                "round": annotation.round,
                "action": annotation.move.action if annotation.move else None,
                "move": str(annotation.move) if annotation.move else None,
            })
    return yaml.safe_dump({"rounds": forcing.rounds, "entries": entries},
                          sort_keys=False, allow_unicode=True)
