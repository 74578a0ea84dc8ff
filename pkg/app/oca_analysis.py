# app/oca_analysis.py

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import networkx as nx
import pandas as pd
import yaml

from app.automata import Configuration, Plts, Subclass, classify
from app.errors import BudgetExceeded, FrontierError, MalformedCertificate, NotPoca
from app.semantics import InducedPlts, explore, refine_levels, search_distinguishing_depth
from app.utils import get_exploration_cap, get_grid_side

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def require_poca(spec):
    if Subclass.POCA not in classify(spec):
        raise NotPoca("spec is not a one-counter pPDA (stack alphabet {X, Z}, Z only at the bottom)")


def counter_configuration(state, m):
    return Configuration(state, ("X",) * m + ("Z",))


def counter_value(configuration):
    """(state, m) for a configuration of the form pX^mZ."""
    stack = configuration.stack
    if not stack or stack[-1] != "Z" or any(x != "X" for x in stack[:-1]):
        raise ValueError(f"{configuration} is not of the form pX^mZ")
    return configuration.state, len(stack) - 1


def underlying_flts(spec):
    """
    Finite pLTS over Q pretending the counter is positive:
    p -a-> d' for every pX -a-> d, with d'(q) = d(q,e) + d(q,X) + d(q,XX).
    """
    require_poca(spec)
    transitions = tuple(
        (rule.state, rule.action, rule.distribution.map(lambda target: target[0]))
        for rule in spec.rules if rule.symbol == "X"
    )
    return Plts(tuple(spec.states), tuple(spec.actions), transitions)


def _union_successors(spec, flts):
    induced = InducedPlts(spec)

    def successors(node):
        kind, value = node
        if kind == "cfg":
            return [(a, d.map(lambda c: ("cfg", c))) for a, d in induced(value)]
        return [(a, d.map(lambda q: ("fin", q))) for a, d in flts.successors(value)]

    return successors


def compute_inc(spec, depth=None, cap=None):
    """
    Configurations pX^mZ (m < k = |Q|) that are ~_k-apart from every state of
    the underlying finite pLTS, compared on the disjoint union of both systems.
    """
    require_poca(spec)
    k = len(spec.states)
    depth = k if depth is None else depth
    flts = underlying_flts(spec)
    centers = [("cfg", counter_configuration(p, m)) for m in range(k) for p in spec.states]
    centers += [("fin", q) for q in spec.states]
    ball = explore(_union_successors(spec, flts), centers, depth, cap)
    partition = None
    for partition in refine_levels(ball, depth):
        pass
    finite_blocks = {partition.block_of[("fin", q)] for q in spec.states}
    inc = frozenset(
        value for kind, value in centers
        if kind == "cfg" and partition.block_of[(kind, value)] not in finite_blocks
    )
    logger.info(f"INC has {len(inc)} member(s): {', '.join(sorted(str(c) for c in inc))}")
    return inc


@dataclass(frozen=True)
class DistResult:
    value: int = None
    budget: int = 0

    @property
    def finite(self):
        return self.value is not None

    def __str__(self):
        return str(self.value) if self.finite else f"INFINITY_UP_TO({self.budget})"


def compute_dist(spec, configuration, max_steps, inc=None, cap=None):
    """Length of a shortest path into INC (probabilities ignored), searched up to max_steps."""
    if inc is None:
        require_poca(spec)
        inc = compute_inc(spec, cap=cap)
    return _dist_search(InducedPlts(spec), configuration, max_steps, inc, cap)


def _dist_search(induced, configuration, max_steps, inc, cap=None):
    cap = get_exploration_cap() if cap is None else cap
    counter_value(configuration)
    if configuration in inc:
        return DistResult(0, max_steps)
    if not inc:
        return DistResult(None, max_steps)
    seen = {configuration}
    frontier = deque([(configuration, 0)])
    while frontier:
        current, steps = frontier.popleft()
        if steps >= max_steps:
            continue
        for _, dist in induced(current):
            for target in dist:
                if target in seen:
                    continue
                if target in inc:
                    return DistResult(steps + 1, max_steps)
                seen.add(target)
                if len(seen) > cap:
                    raise BudgetExceeded(f"dist search passed the cap of {cap} configurations", cap=cap)
                frontier.append((target, steps + 1))
    return DistResult(None, max_steps)


class Background(Enum):
    COLOUR_1 = "COLOUR_1"
    COLOUR_0 = "COLOUR_0"
    NOT_BACKGROUND = "NOT_BACKGROUND"


@dataclass(frozen=True, order=True)
class GridPoint:
    m: int
    n: int
    p: str
    q: str

    def configurations(self):
        return counter_configuration(self.p, self.m), counter_configuration(self.q, self.n)

    def __str__(self):
        return f"({self.m}, {self.n}, ({self.p}, {self.q}))"


class CounterAnalysis:
    """Shared INC, dist and ~_k data for many grid points of one pOCA."""

    def __init__(self, spec, k_depth=None, dist_budget=None, cap=None):
        require_poca(spec)
        self.spec = spec
        self.k = len(spec.states)
        self.k_depth = self.k if k_depth is None else k_depth
        self.dist_budget = dist_budget if dist_budget is not None else 4 * self.k * self.k + 8
        self.cap = cap
        self.induced = InducedPlts(spec)
        self.inc = compute_inc(spec, cap=cap)
        self._dist = {}
        self._classes = {}
        self._class_bound = -1

    def dist(self, state, m):
        key = (state, m)
        if key not in self._dist:
            self._dist[key] = _dist_search(self.induced, counter_configuration(state, m),
                                           self.dist_budget, self.inc, self.cap)
        return self._dist[key]

    def _ensure_classes(self, bound):
        if bound <= self._class_bound:
            return
        bound = max(bound, 2 * self._class_bound + 1)
        centers = [counter_configuration(p, m) for m in range(bound + 1) for p in self.spec.states]
        ball = explore(self.induced, centers, self.k_depth, self.cap)
        partition = None
        for partition in refine_levels(ball, self.k_depth):
            pass
        self._classes = {c: partition.block_of[c] for c in centers}
        self._class_bound = bound

    def similar(self, point):
        """pX^mZ ~_kDepth qX^nZ."""
        s, t = point.configurations()
        if s == t:
            return True
        self._ensure_classes(max(point.m, point.n))
        return self._classes[s] == self._classes[t]

    def background(self, point):
        ds, dt = self.dist(point.p, point.m), self.dist(point.q, point.n)
        if not ds.finite and not dt.finite:
            return Background.COLOUR_1 if self.similar(point) else Background.COLOUR_0
        if ds.value != dt.value:
            return Background.COLOUR_0
        return Background.NOT_BACKGROUND

    def moves(self, state, m):
        return self.induced(counter_configuration(state, m))


def classify_background(spec, point, k_depth=None, dist_budget=None, cap=None):
    """
    Background colour of a grid point: both dists infinite (within budget)
    gives colour 1 iff ~_k; resolved and different dists give colour 0;
    equal finite dists mean the point may lie in a belt.
    """
    return CounterAnalysis(spec, k_depth, dist_budget, cap).background(point)


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    pair: tuple = None
    reason: str = ""

    def __str__(self):
        if self.consistent:
            return "CONSISTENT"
        return f"WITNESS({self.pair[0]}, {self.pair[1]}: {self.reason})"


def _derived_classes(moves_s, moves_t, related):
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    succ_s = [x for _, d in moves_s for x in d]
    succ_t = [y for _, d in moves_t for y in d]
    for x in succ_s:
        for y in succ_t:
            if x != y and related(x, y):
                parent[find(x)] = find(y)
    return find


def _lift_with(dist, find):
    masses = {}
    for x, p in dist.items():
        root = find(x)
        masses[root] = masses.get(root, Fraction(0)) + p
    return frozenset(masses.items())


def pair_consistency(moves_s, moves_t, related):
    """(True, '') or (False, reason) for one pair against its derived equivalence R'."""
    find = _derived_classes(moves_s, moves_t, related)
    lifted_t = {(a, _lift_with(d, find)) for a, d in moves_t}
    lifted_s = {(a, _lift_with(d, find)) for a, d in moves_s}
    for side, moves, other in (("left", moves_s, lifted_t), ("right", moves_t, lifted_s)):
        for action, dist in moves:
            if (action, _lift_with(dist, find)) not in other:
                return False, f"{side} {action}-move has no R'-equivalent match"
    return True, ""


def consistency_check(fragment, relation, check=None):
    """
    Every checked pair (s, t) must be consistent w.r.t. the relation: moves
    matched up to the least equivalence generated by related successor pairs.
    `fragment` maps each state to its complete list of (action, Distribution).
    """
    relation = set(relation)
    pairs = relation if check is None else set(check)
    for s, t in sorted(pairs, key=lambda pair: (str(pair[0]), str(pair[1]))):
        for state in (s, t):
            if state not in fragment:
                raise FrontierError(f"successors of {state} are not in the fragment")
        ok, reason = pair_consistency(fragment[s], fragment[t], lambda x, y: (x, y) in relation)
        if not ok:
            return ConsistencyResult(False, (s, t), reason)
    return ConsistencyResult(True)


@dataclass(frozen=True)
class GridBounds:
    m_max: int
    n_max: int
    k_depth: int
    dist_budget: int
    search_depth: int = None

    @classmethod
    def default(cls, spec, m_max=None, n_max=None):
        """
        Sides default to k^2, capped by BISIM_GRID_SIDE: the grid has
        (m_max + 1)(n_max + 1)k^2 points, which is out of reach for gadget-sized k.
        """
        k = len(spec.states)
        side = min(k * k, get_grid_side())
        if side < k * k and (m_max is None or n_max is None):
            logger.warning(f"Grid side capped at {side} (k^2 = {k * k}); set BISIM_GRID_SIDE or --m-max/--n-max")
        m_max = side if m_max is None else m_max
        n_max = side if n_max is None else n_max
        return cls(m_max, n_max, k, k * (max(m_max, n_max) + 2) + k * k)

    def effective_search_depth(self):
        if self.search_depth is not None:
            return self.search_depth
        return 2 * (self.m_max + self.n_max) + self.k_depth + 4


@dataclass
class GridResult:
    verdict: str
    depth: int = None
    reason: str = ""
    colouring: dict = field(default_factory=dict)
    unresolved: frozenset = frozenset()
    sweeps: int = 0

    def __str__(self):
        if self.verdict == "NOT_BISIMILAR":
            return f"NOT_BISIMILAR({self.depth})"
        if self.verdict == "INCONCLUSIVE":
            return f"INCONCLUSIVE({self.reason})"
        return self.verdict


def _successor_points(analysis, point):
    for _, d in analysis.moves(point.p, point.m):
        for s in d:
            yield s


class _GridColouring:
    """Lookup for grid colours; points beyond the bounds fall back to the background."""

    def __init__(self, analysis, colour, bounds):
        self.analysis = analysis
        self.colour = colour
        self.bounds = bounds
        self.unresolved = set()
        self._outside = {}

    def value(self, point):
        if point in self.colour:
            return self.colour[point]
        if point not in self._outside:
            bg = self.analysis.background(point)
            self._outside[point] = bg
        bg = self._outside[point]
        if bg is Background.NOT_BACKGROUND:
            self.unresolved.add(point)
            return 0
        return 1 if bg is Background.COLOUR_1 else 0


def _point_consistent(analysis, lookup, point, trace=None):
    s, t = point.configurations()

    def related(x, y):
        px, mx = counter_value(x)
        py, my = counter_value(y)
        neighbour = GridPoint(mx, my, px, py)
        before = len(lookup.unresolved)
        value = lookup.value(neighbour)
        if trace is not None:
            if len(lookup.unresolved) > before or neighbour in lookup.unresolved:
                trace["unresolved"].add(neighbour)
            elif value == 1 and neighbour in lookup.colour:
                trace["inside"].add(neighbour)
        return value == 1

    ok, _ = pair_consistency(analysis.induced(s), analysis.induced(t), related)
    return ok


def decide_bounded_grid(spec, c1, c2, bounds=None, cap=None):
    """
    Greatest consistent colouring of the bounded grid: start at 1 wherever the
    background does not say 0, then erase inconsistent points in row-major
    sweeps until stable. Unresolved points beyond the bounds count as 0.
    """
    require_poca(spec)
    bounds = bounds or GridBounds.default(spec)
    p1, m1 = counter_value(c1)
    p2, m2 = counter_value(c2)
    if m1 > bounds.m_max or m2 > bounds.n_max:
        raise ValueError(f"({c1}, {c2}) lies outside the grid bounds {bounds.m_max} x {bounds.n_max}")
    analysis = CounterAnalysis(spec, bounds.k_depth, bounds.dist_budget, cap)
    points = [GridPoint(m, n, p, q)
              for m in range(bounds.m_max + 1) for n in range(bounds.n_max + 1)
              for p in spec.states for q in spec.states]
    colour = {pt: 0 if analysis.background(pt) is Background.COLOUR_0 else 1 for pt in points}
    lookup = _GridColouring(analysis, colour, bounds)

    sweeps, changed = 0, True
    while changed:
        changed = False
        sweeps += 1
        for point in points:
            if colour[point] == 1 and not _point_consistent(analysis, lookup, point):
                colour[point] = 0
                changed = True
    logger.info(f"Grid fixpoint stable after {sweeps} sweep(s); "
                f"{sum(colour.values())} of {len(points)} points related")

    target = GridPoint(m1, m2, p1, p2)
    if colour[target] == 1:
        tainted = _tainted_dependencies(analysis, lookup, target)
        if not tainted:
            return GridResult("BISIMILAR_CERTIFIED", reason="consistent colouring relates the pair",
                              colouring=colour, unresolved=frozenset(lookup.unresolved), sweeps=sweeps)
        reason = f"{len(tainted)} boundary point(s) unresolved, e.g. {min(tainted)}"
    else:
        reason = "pair erased by the fixpoint"
    depth = search_distinguishing_depth(spec, c1, c2, bounds.effective_search_depth(), cap)
    if depth is not None:
        return GridResult("NOT_BISIMILAR", depth=depth, reason="distinguished by bounded refinement",
                          colouring=colour, unresolved=frozenset(lookup.unresolved), sweeps=sweeps)
    logger.warning(f"Grid analysis inconclusive: {reason}")
    return GridResult("INCONCLUSIVE", reason=reason, colouring=colour,
                      unresolved=frozenset(lookup.unresolved), sweeps=sweeps)


def _tainted_dependencies(analysis, lookup, target):
    """Unresolved points that the target's consistency argument depends on."""
    seen, queue, tainted = {target}, deque([target]), set()
    while queue:
        point = queue.popleft()
        trace = {"inside": set(), "unresolved": set()}
        _point_consistent(analysis, lookup, point, trace)
        tainted |= trace["unresolved"]
        for neighbour in trace["inside"] - seen:
            seen.add(neighbour)
            queue.append(neighbour)
    return tainted


def inc_table(spec, inc):
    rows = [{"Configuration": str(c), "State": c.state, "Counter": len(c.stack) - 1}
            for c in sorted(inc)]
    return pd.DataFrame(rows, columns=["Configuration", "State", "Counter"])


def dist_table(analysis, bound):
    rows = []
    for m in range(bound + 1):
        row = {"m": m}
        for state in analysis.spec.states:
            row[state] = str(analysis.dist(state, m))
        rows.append(row)
    return pd.DataFrame(rows)


# Periodic certificates


def cycle_effects(spec):
    """Counter effects of the simple cycles of the X-rule control graph."""
    graph = nx.DiGraph()
    graph.add_nodes_from(spec.states)
    for rule in spec.rules:
        if rule.symbol != "X":
            continue
        for state, word in rule.distribution:
            if graph.has_edge(rule.state, state):
                graph[rule.state][state]["effects"].add(len(word) - 1)
            else:
                graph.add_edge(rule.state, state, effects={len(word) - 1})
    effects = set()
    for cycle in nx.simple_cycles(graph):
        sums = {0}
        for u, v in zip(cycle, cycle[1:] + cycle[:1]):
            sums = {s + e for s in sums for e in graph[u][v]["effects"]}
        effects |= sums
    return effects


def background_period(spec):
    return math.lcm(1, *(abs(e) for e in cycle_effects(spec) if e))


@dataclass
class Belt:
    """Points with 0 <= d*n - c*m - d*offset < d*thickness, i.e. around n = (c/d) m + offset."""

    c: int
    d: int
    offset: int
    thickness: int
    pattern: dict = field(default_factory=dict)

    def position(self, m, n):
        return self.d * n - self.c * m - self.d * self.offset

    def contains(self, m, n):
        return 0 <= self.position(m, n) < self.d * self.thickness

    def phase(self, m, psi):
        return m % (psi * self.d)


@dataclass
class Colouring:
    k: int
    psi: int
    m_bound: int
    n_bound: int
    explicit: dict = field(default_factory=dict)
    belts: list = field(default_factory=list)

    def belt_of(self, m, n):
        for belt in self.belts:
            if belt.contains(m, n):
                return belt
        return None

    def in_explicit_region(self, m, n):
        return m <= self.m_bound and n <= self.n_bound


class _CertificateColouring:
    def __init__(self, colouring, analysis):
        self.colouring = colouring
        self.analysis = analysis
        self.uncovered = []
        self.override = {}

    def value(self, point):
        if point in self.override:
            return self.override[point]
        c = self.colouring
        if c.in_explicit_region(point.m, point.n):
            return c.explicit[point]
        belt = c.belt_of(point.m, point.n)
        if belt is not None:
            key = (belt.phase(point.m, c.psi), belt.position(point.m, point.n), point.p, point.q)
            return belt.pattern.get(key, 0)
        bg = self.analysis.background(point)
        if bg is Background.NOT_BACKGROUND:
            self.uncovered.append(point)
            return 0
        return 1 if bg is Background.COLOUR_1 else 0


def certificate_from_grid(spec, colour, bounds, belts, psi=None):
    """
    Turn a grid colouring into a certificate. Belt patterns are read from the
    largest explicit m in each phase class for which the belt row is inside the grid.
    """
    k = len(spec.states)
    psi = math.factorial(k) if psi is None else psi
    shaped = []
    for belt in belts:
        pattern = {}
        period = psi * belt.d
        for phase in range(period):
            for v in range(belt.d * belt.thickness):
                for p in spec.states:
                    for q in spec.states:
                        pattern[(phase, v, p, q)] = _pattern_value(colour, bounds, belt, phase, period, v, p, q)
        shaped.append(Belt(belt.c, belt.d, belt.offset, belt.thickness, pattern))
    explicit = {pt: colour[pt] for pt in colour}
    return Colouring(k, psi, bounds.m_max, bounds.n_max, explicit, shaped)


def _pattern_value(colour, bounds, belt, phase, period, v, p, q):
    m = bounds.m_max - ((bounds.m_max - phase) % period)
    while m >= 0:
        numerator = v + belt.c * m + belt.d * belt.offset
        if numerator % belt.d == 0:
            n = numerator // belt.d
            if 0 <= n <= bounds.n_max:
                return colour[GridPoint(m, n, p, q)]
        m -= period
    return 0


@dataclass(frozen=True)
class CertificateVerdict:
    accepted: bool
    point: GridPoint = None
    reason: str = ""

    def __str__(self):
        return "ACCEPTED" if self.accepted else f"REJECTED({self.point}, {self.reason})"


def _check_structure(spec, colouring):
    k = len(spec.states)
    if colouring.k != k:
        raise MalformedCertificate(f"certificate is for k={colouring.k}, automaton has k={k}")
    if colouring.psi <= 0:
        raise MalformedCertificate("psi must be positive")
    period = background_period(spec)
    if colouring.psi % period:
        raise MalformedCertificate(f"psi={colouring.psi} is not a multiple of the cycle period {period}")
    for belt in colouring.belts:
        if not (1 <= belt.c <= k * k and 1 <= belt.d <= k * k):
            raise MalformedCertificate(f"belt slope {belt.c}/{belt.d} outside 1..{k * k}")
        if belt.thickness <= 0:
            raise MalformedCertificate("belt thickness must be positive")
    for m in range(colouring.m_bound + 1):
        for n in range(colouring.n_bound + 1):
            for p in spec.states:
                for q in spec.states:
                    if GridPoint(m, n, p, q) not in colouring.explicit:
                        raise MalformedCertificate(f"explicit region misses {GridPoint(m, n, p, q)}")


def verify_periodic_certificate(spec, colouring, k_depth=None, dist_budget=None, cap=None):
    """
    Check a periodic colouring: local consistency of every explicit 1-point,
    identity points coloured 1, agreement with the background classification,
    consistency of belt 1-points over one full period past the explicit region,
    and psi-periodicity of the background there.
    """
    require_poca(spec)
    _check_structure(spec, colouring)
    window_m = colouring.m_bound + colouring.psi * max([b.d for b in colouring.belts] or [1]) + 1
    window_n = colouring.n_bound + colouring.psi * max([b.c for b in colouring.belts] or [1]) + 1
    budget = dist_budget if dist_budget is not None else len(spec.states) * (max(window_m, window_n) + colouring.psi + 2) + 8
    analysis = CounterAnalysis(spec, k_depth, budget, cap)
    lookup = _CertificateColouring(colouring, analysis)

    for point in sorted(colouring.explicit):
        value = colouring.explicit[point]
        if point.m == point.n and point.p == point.q and value != 1:
            return CertificateVerdict(False, point, "identity pair coloured 0")
        bg = analysis.background(point)
        if bg is not Background.NOT_BACKGROUND and value != (1 if bg is Background.COLOUR_1 else 0):
            return CertificateVerdict(False, point, f"disagrees with background {bg.value}")
        if value == 1:
            verdict = _check_point(analysis, lookup, point)
            if verdict is not None:
                return verdict

    for m in range(window_m + 1):
        for n in range(window_n + 1):
            if colouring.in_explicit_region(m, n):
                continue
            belt = colouring.belt_of(m, n)
            for p in spec.states:
                for q in spec.states:
                    point = GridPoint(m, n, p, q)
                    if belt is None:
                        verdict = _check_background_point(analysis, colouring, point)
                    elif lookup.value(point) == 1:
                        verdict = _check_point(analysis, lookup, point)
                    else:
                        verdict = None
                    if verdict is not None:
                        return verdict
    logger.info("Periodic certificate accepted")
    return CertificateVerdict(True)


def _consistent_at(analysis, lookup, point, zeros=None):
    s, t = point.configurations()

    def related(x, y):
        neighbour = GridPoint(counter_value(x)[1], counter_value(y)[1], x.state, y.state)
        value = lookup.value(neighbour)
        if value == 0 and zeros is not None:
            zeros.add(neighbour)
        return value == 1

    return pair_consistency(analysis.induced(s), analysis.induced(t), related)


def _misplaced_zero(analysis, lookup, point, zeros):
    """An explicit 0-point which, coloured 1, repairs point and is consistent itself."""
    explicit = lookup.colouring.explicit
    for candidate in sorted(zeros):
        if explicit.get(candidate) != 0 or analysis.background(candidate) is Background.COLOUR_0:
            continue
        before = len(lookup.uncovered)
        lookup.override[candidate] = 1
        try:
            repaired = (_consistent_at(analysis, lookup, point)[0]
                        and _consistent_at(analysis, lookup, candidate)[0])
        finally:
            del lookup.override[candidate]
            del lookup.uncovered[before:]
        if repaired:
            return candidate
    return None


def _check_point(analysis, lookup, point):
    before = len(lookup.uncovered)
    zeros = set()
    ok, reason = _consistent_at(analysis, lookup, point, zeros)
    if len(lookup.uncovered) > before:
        return CertificateVerdict(False, lookup.uncovered[before], "neither explicit, belt nor background")
    if not ok:
        culprit = _misplaced_zero(analysis, lookup, point, zeros)
        if culprit is not None:
            return CertificateVerdict(False, culprit, f"coloured 0, but {point} needs it and it is consistent as 1")
        return CertificateVerdict(False, point, f"inconsistent: {reason}")
    return None


def _check_background_point(analysis, colouring, point):
    bg = analysis.background(point)
    if bg is Background.NOT_BACKGROUND:
        return CertificateVerdict(False, point, "neither explicit, belt nor background")
    for shifted in (GridPoint(point.m + colouring.psi, point.n, point.p, point.q),
                    GridPoint(point.m, point.n + colouring.psi, point.p, point.q)):
        if colouring.belt_of(shifted.m, shifted.n) is not None:
            continue
        other = analysis.background(shifted)
        if other is not Background.NOT_BACKGROUND and other is not bg:
            return CertificateVerdict(False, point, f"background not {colouring.psi}-periodic")
    return None


def colouring_to_yaml(colouring):
    doc = {
        "k": colouring.k,
        "psi": colouring.psi,
        "bounds": {"m": colouring.m_bound, "n": colouring.n_bound},
        "explicit": [f"{pt.m} {pt.n} {pt.p} {pt.q} {v}" for pt, v in sorted(colouring.explicit.items())],
        "belts": [
            {
                "slope": f"{b.c}/{b.d}",
                "offset": b.offset,
                "thickness": b.thickness,
                "pattern": [f"{ph} {v} {p} {q} {c}" for (ph, v, p, q), c in sorted(b.pattern.items())],
            }
            for b in colouring.belts
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def colouring_from_yaml(text):
    try:
        doc = yaml.safe_load(text)
        explicit = {}
        for line in doc.get("explicit") or []:
            m, n, p, q, v = str(line).split()
            explicit[GridPoint(int(m), int(n), p, q)] = int(v)
        belts = []
        for entry in doc.get("belts") or []:
            c, _, d = str(entry["slope"]).partition("/")
            d = d or 1
            pattern = {}
            for line in entry.get("pattern") or []:
                ph, v, p, q, colour = str(line).split()
                pattern[(int(ph), int(v), p, q)] = int(colour)
            belts.append(Belt(int(c), int(d), int(entry["offset"]), int(entry["thickness"]), pattern))
        return Colouring(int(doc["k"]), int(doc["psi"]), int(doc["bounds"]["m"]),
                         int(doc["bounds"]["n"]), explicit, belts)
    except (yaml.YAMLError, KeyError, TypeError, ValueError, AttributeError) as e:
        raise MalformedCertificate(f"cannot read certificate: {e}") from e
