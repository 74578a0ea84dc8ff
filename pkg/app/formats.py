# app/formats.py
#
# Line-oriented text formats:
#
#   states: p q r
#   stack: X X' Y Z
#   actions: a
#   visibility: r=a_r int=a,a_int c=a_c
#   p X a -> 1/2 q X X | 1/2 p .
#
# `.` is the empty word. Whole-line comments start with `#` (inline `#` is
# not a comment, since `#` is itself an action name of reduced automata).

import logging

from app.automata import Configuration, Distribution, PpdaSpec, Rule, Visibility, parse_rational, render_rational
from app.errors import FormatError
from app.hardness_gadgets import OneLetterAfa, PushdownGame

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

AUTOMATON_HEADERS = ("states", "stack", "actions", "visibility")
GAME_HEADERS = ("owner0", "owner1", "initial")
EMPTY_WORD = "."


def _content_lines(text):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield number, line


def _split_header(line):
    key, _, value = line.partition(":")
    return key.strip().lower(), value.split()


def _parse_visibility(tokens, number):
    classes = {"r": [], "int": [], "c": []}
    for token in tokens:
        name, sep, actions = token.partition("=")
        if not sep or name not in classes:
            raise FormatError(f"bad visibility class {token!r}", number)
        classes[name].extend(a for a in actions.split(",") if a)
    return Visibility(classes["r"], classes["int"], classes["c"])


def _parse_rule(line, number):
    left, arrow, right = line.partition("->")
    if not arrow:
        raise FormatError(f"expected a header or a rule, got {line!r}", number)
    head = left.split()
    if len(head) != 3:
        raise FormatError("rule head must be 'state symbol action'", number)
    entries = []
    for alternative in right.split("|"):
        tokens = alternative.split()
        if len(tokens) < 2:
            raise FormatError(f"alternative {alternative.strip()!r} needs a probability and a state", number)
        try:
            probability = parse_rational(tokens[0])
        except ValueError as e:
            raise FormatError(str(e), number) from e
        if probability == 0:
            raise FormatError("alternatives must have positive probability", number)
        word = tuple(t for t in tokens[2:] if t != EMPTY_WORD)
        entries.append(((tokens[1], word), probability))
    return Rule(head[0], head[1], head[2], Distribution(entries))


def _parse_automaton(text, extra_headers=()):
    headers, rules = {}, []
    allowed = AUTOMATON_HEADERS + tuple(extra_headers)
    for number, line in _content_lines(text):
        if "->" not in line and ":" in line:
            key, tokens = _split_header(line)
            if key not in allowed:
                raise FormatError(f"unknown header {key!r}", number)
            if key in headers:
                raise FormatError(f"duplicate header {key!r}", number)
            headers[key] = (number, tokens)
        else:
            rules.append(_parse_rule(line, number))
    for key in ("states", "stack", "actions"):
        if key not in headers:
            raise FormatError(f"missing '{key}:' header")
    visibility = None
    if "visibility" in headers:
        number, tokens = headers["visibility"]
        visibility = _parse_visibility(tokens, number)
    spec = PpdaSpec(
        states=tuple(headers["states"][1]),
        stack_alphabet=tuple(headers["stack"][1]),
        actions=tuple(headers["actions"][1]),
        rules=tuple(rules),
        visibility=visibility,
    )
    return spec, headers


def parse_ppda(text):
    """Parse the automaton text format into a PpdaSpec (not yet validated)."""
    spec, _ = _parse_automaton(text)
    logger.debug(f"Parsed automaton with {len(spec.rules)} rules")
    return spec


def read_ppda(path):
    with open(path, encoding="utf-8") as handle:
        return parse_ppda(handle.read())


def render_word(word):
    return " ".join(word) if word else EMPTY_WORD


def render_rule(rule):
    alternatives = " | ".join(
        f"{render_rational(p)} {state} {render_word(word)}"
        for (state, word), p in rule.distribution.items()
    )
    return f"{rule.state} {rule.symbol} {rule.action} -> {alternatives}"


def _render_visibility(vis):
    def group(actions):
        return ",".join(sorted(actions))
    return f"visibility: r={group(vis.returns)} int={group(vis.internals)} c={group(vis.calls)}"


def render_ppda(spec, comment=None):
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append("states: " + " ".join(spec.states))
    lines.append("stack: " + " ".join(spec.stack_alphabet))
    lines.append("actions: " + " ".join(spec.actions))
    if spec.visibility is not None:
        lines.append(_render_visibility(spec.visibility))
    lines.extend(render_rule(rule) for rule in spec.rules)
    return "\n".join(lines) + "\n"


def _split_symbols(text, symbols):
    """All ways to read text as a concatenation of stack symbols (longest first)."""
    if not text:
        return ()
    for symbol in sorted(symbols, key=len, reverse=True):
        if text.startswith(symbol):
            rest = _split_symbols(text[len(symbol):], symbols)
            if rest is not None:
                return (symbol,) + rest
    return None


def parse_configuration(spec, text):
    """
    Parse "pXZ" (longest-match tokenization) or "p X Z" into a Configuration.
    A lone state, or a state followed by '.', is the empty-stack configuration.
    """
    tokens = text.split()
    if not tokens:
        raise FormatError("empty configuration")
    if len(tokens) > 1:
        state, word = tokens[0], tuple(t for t in tokens[1:] if t != EMPTY_WORD)
        if state not in spec.states:
            raise FormatError(f"unknown state {state!r} in configuration {text!r}")
        unknown = [x for x in word if x not in spec.stack_alphabet]
        if unknown:
            raise FormatError(f"unknown stack symbol(s) {' '.join(unknown)} in configuration {text!r}")
        return Configuration(state, word)
    compact = tokens[0]
    for state in sorted(spec.states, key=len, reverse=True):
        if not compact.startswith(state):
            continue
        rest = compact[len(state):]
        if rest == EMPTY_WORD:
            return Configuration(state, ())
        word = _split_symbols(rest, spec.stack_alphabet)
        if word is not None:
            return Configuration(state, word)
    raise FormatError(f"cannot read {text!r} as a configuration of this automaton")


def render_configuration(configuration):
    return f"{configuration.state} {render_word(configuration.stack)}"


def parse_afa(text):
    """Parse a one-letter alternating automaton."""
    states, initial, accepting, delta = None, None, (), {}
    for number, line in _content_lines(text):
        if "=" in line and ":" not in line:
            left, _, right = line.partition("=")
            q = left.strip()
            for operator, kind in (("&", "and"), ("|", "or")):
                if operator in right:
                    q1, _, q2 = right.partition(operator)
                    delta[q] = (kind, q1.strip(), q2.strip())
                    break
            else:
                raise FormatError(f"transition of {q!r} needs '&' or '|'", number)
            continue
        key, tokens = _split_header(line)
        if key == "afa-states":
            states = tuple(tokens)
        elif key == "initial":
            if len(tokens) != 1:
                raise FormatError("exactly one initial state expected", number)
            initial = tokens[0]
        elif key == "accepting":
            accepting = tuple(tokens)
        else:
            raise FormatError(f"unknown AFA header {key!r}", number)
    if states is None or initial is None:
        raise FormatError("AFA needs 'afa-states:' and 'initial:' headers")
    afa = OneLetterAfa(states, initial, frozenset(accepting), delta)
    problems = afa.problems()
    if problems:
        raise FormatError("; ".join(problems))
    return afa


def render_afa(afa):
    lines = [
        "afa-states: " + " ".join(afa.states),
        f"initial: {afa.initial}",
        "accepting: " + " ".join(q for q in afa.states if q in afa.accepting),
    ]
    for q in afa.states:
        kind, q1, q2 = afa.delta[q]
        lines.append(f"{q} = {q1} {'&' if kind == 'and' else '|'} {q2}")
    return "\n".join(lines) + "\n"


def parse_game(text):
    """Automaton format plus owner0:/owner1: state lists and 'initial: p X'."""
    spec, headers = _parse_automaton(text, GAME_HEADERS)
    if "initial" not in headers:
        raise FormatError("game needs an 'initial: state symbol' header")
    number, tokens = headers["initial"]
    if len(tokens) != 2:
        raise FormatError("initial head must be 'state symbol'", number)
    owner0 = frozenset(headers.get("owner0", (0, ()))[1])
    owner1 = frozenset(headers.get("owner1", (0, ()))[1])
    return PushdownGame(spec, owner0, owner1, (tokens[0], tokens[1]))


def render_game(game):
    body = render_ppda(game.spec)
    extra = [
        "owner0: " + " ".join(q for q in game.spec.states if q in game.owner0),
        "owner1: " + " ".join(q for q in game.spec.states if q in game.owner1),
        f"initial: {game.initial[0]} {game.initial[1]}",
    ]
    return body + "\n".join(extra) + "\n"
