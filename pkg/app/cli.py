# app/cli.py

import argparse
import json
import logging
import sys

from app.automata import classify, embed_plts, validate
from app.difftest import SUITES, run_difftest, summary_table
from app.errors import BisimError, BudgetExceeded, UnvalidatedError, UsageError
from app.formats import parse_afa, parse_configuration, parse_game, read_ppda, render_ppda
from app.hardness_gadgets import afa_to_poca, and_demo, game_to_pvpda, or_demo
from app.oca_analysis import (
    Belt, CounterAnalysis, GridBounds, certificate_from_grid, colouring_from_yaml, colouring_to_yaml,
    decide_bounded_grid, dist_table, inc_table, verify_periodic_certificate,
)
from app.reduction import build_reduced, build_reduced_visibly, size_table
from app.semantics import ball_to_dot, bisim_classes, bisim_depth, bisimulation_partition, dump_ball, unfold
from app.utils import configure_logging
from app.vpda_decision import annotations_to_yaml, decide_vpda, forcing_table, largest_forcing

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_NOT_BISIMILAR, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3

ENVIRONMENT_HELP = """environment:
  BISIM_EXPLORATION_CAP  configuration cap for explorations (default 1000000)
  BISIM_SUPPORT_CAP      largest rule support the reduction accepts (default 16)
  BISIM_GAME_NODE_CAP    node cap of the exact game solver (default 10000)
  BISIM_GRID_SIDE        largest default side of the pOCA grid (default 6)
  BISIM_LOG_LEVEL        log level when --log-level is not given (default INFO)

exit status: 0 bisimilar/success, 1 not bisimilar/violation, 2 inconclusive, 3 usage or parse error"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _failure(action, e):
    logger.error(f"Failed to {action}: {e}")
    status = EXIT_INCONCLUSIVE if isinstance(e, BudgetExceeded) else EXIT_USAGE
    report = {"Error": f"Failed to {action}: {e}", "Status": status}
    if isinstance(e, BisimError):
        report["Code"] = e.code
    return report


def _load(path):
    spec = read_ppda(path)
    report = validate(spec)
    if not report.ok:
        raise UnvalidatedError("; ".join(report.lines()), issues=report.lines())
    return spec


def _read(path):
    with open(path, encoding="utf-8") as handle:
        return handle.read()


def _done(status, lines, record):
    return {"Status": status, "Lines": lines, "Record": record}


def run_validate(args):
    try:
        spec = read_ppda(args.automaton)
        report = validate(spec)
        lines = report.lines() or ["OK"]
        record = {"command": "validate", "ok": report.ok, "issues": report.lines()}
        return _done(EXIT_OK if report.ok else EXIT_NOT_BISIMILAR, lines, record)
    except (BisimError, OSError) as e:
        return _failure("validate automaton", e)


def run_classify(args):
    try:
        flags = sorted(flag.value for flag in classify(_load(args.automaton)))
        return _done(EXIT_OK, [" ".join(flags) or "(none)"], {"command": "classify", "subclasses": flags})
    except (BisimError, OSError) as e:
        return _failure("classify automaton", e)


def run_check(args):
    try:
        spec = _load(args.automaton)
        left, right = parse_configuration(spec, args.left), parse_configuration(spec, args.right)
        verdict = bisim_depth(spec, left, right, args.depth, args.cap)
        if verdict.equivalent:
            wording = f"equivalent at depth {args.depth} (bounded)"
        else:
            wording = f"distinguished at depth {verdict.depth}"
        lines = [str(verdict), wording]
        if args.dump or args.dot:
            ball = unfold(spec, left, right, args.depth, args.cap)
            if args.dump:
                lines.append(dump_ball(ball, bisim_classes(spec, ball, args.depth)))
            if args.dot:
                lines.append(ball_to_dot(ball))
        record = {
            "command": "check", "left": str(left), "right": str(right), "depth": args.depth,
            "equivalent": verdict.equivalent, "verdict": str(verdict),
        }
        return _done(EXIT_OK if verdict.equivalent else EXIT_NOT_BISIMILAR, lines, record)
    except (BisimError, OSError, ValueError) as e:
        return _failure("check configurations", e)


def run_reduce(args):
    try:
        spec = _load(args.automaton)
        reduced = build_reduced_visibly(spec) if args.visibly else build_reduced(spec)
        text = render_ppda(reduced.spec, comment=f"reduction of {args.automaton}")
        lines = []
        if args.output:
            with open(args.output, "w", encoding="utf-8") as handle:
                handle.write(text)
            lines.append(f"wrote {args.output}")
        else:
            lines.append(text.rstrip("\n"))
        table = size_table(reduced)
        if args.stats:
            lines.append(table.to_string(index=False))
        record = {
            "command": "reduce", "visibly": args.visibly,
            "rules": len(reduced.spec.rules), "stack_symbols": len(reduced.spec.stack_alphabet),
            "actions": len(reduced.spec.actions),
            "within_bounds": bool(table["Within Bound"].all()),
        }
        return _done(EXIT_OK, lines, record)
    except (BisimError, OSError) as e:
        return _failure("reduce automaton", e)


def run_vpda_decide(args):
    try:
        spec = _load(args.automaton)
        left, right = parse_configuration(spec, args.left), parse_configuration(spec, args.right)
        forcing = largest_forcing(spec)
        decision = decide_vpda(spec, left, right, forcing)
        wording = "bisimilar (exact, forcing)" if decision.bisimilar else "not bisimilar (exact, forcing)"
        lines = [decision.verdict, wording]
        if args.dump_forcing:
            lines.append(forcing_table(forcing).to_string(index=False))
        if args.certificate:
            lines.append(annotations_to_yaml(forcing).rstrip("\n"))
        record = {
            "command": "vpda-decide", "left": str(left), "right": str(right),
            "verdict": decision.verdict, "rounds": forcing.rounds,
            "minimal_sets": forcing.relation.size(),
        }
        return _done(EXIT_OK if decision.bisimilar else EXIT_NOT_BISIMILAR, lines, record)
    except (BisimError, OSError) as e:
        return _failure("decide visibly pushdown bisimilarity", e)


def _parse_belt(text):
    try:
        slope, offset, thickness = text.split(":")
        c, _, d = slope.partition("/")
        return Belt(int(c), int(d or 1), int(offset), int(thickness))
    except ValueError as e:
        raise UsageError(f"belt must look like c/d:offset:thickness, got {text!r}") from e


def run_oca_analyze(args):
    try:
        spec = _load(args.automaton)
        analysis = CounterAnalysis(spec, args.k_depth, args.dist_budget, args.cap)
        lines = [f"INC ({len(analysis.inc)} member(s))", inc_table(spec, analysis.inc).to_string(index=False)]
        record = {"command": "oca-analyze", "inc": sorted(str(c) for c in analysis.inc)}
        status = EXIT_OK
        if args.dist is not None:
            lines.append(dist_table(analysis, args.dist).to_string(index=False))
        if args.verify:
            colouring = colouring_from_yaml(_read(args.verify))
            verdict = verify_periodic_certificate(spec, colouring, args.k_depth, args.dist_budget, args.cap)
            lines.append(str(verdict))
            record["certificate"] = str(verdict)
            status = EXIT_OK if verdict.accepted else EXIT_NOT_BISIMILAR
        if args.left and args.right:
            left, right = parse_configuration(spec, args.left), parse_configuration(spec, args.right)
            bounds = GridBounds.default(spec, args.m_max, args.n_max)
            result = decide_bounded_grid(spec, left, right, bounds, args.cap)
            lines.append(str(result))
            record["verdict"] = str(result)
            status = {"BISIMILAR_CERTIFIED": EXIT_OK, "NOT_BISIMILAR": EXIT_NOT_BISIMILAR}.get(
                result.verdict, EXIT_INCONCLUSIVE)
            if args.belt:
                colouring = certificate_from_grid(spec, result.colouring, bounds,
                                                  [_parse_belt(b) for b in args.belt], args.psi)
                lines.append(colouring_to_yaml(colouring).rstrip("\n"))
        return _done(status, lines, record)
    except (BisimError, OSError, ValueError) as e:
        return _failure("analyze one-counter automaton", e)


def run_gadget(args):
    try:
        if args.kind == "afa2poca":
            encoded = afa_to_poca(parse_afa(_read(args.input)))
            text = render_ppda(encoded.spec, comment=f"compare {encoded.p} X Z with {encoded.p_prime} X Z")
            record = {"command": "gadget", "kind": args.kind, "left": f"{encoded.p}XZ",
                      "right": f"{encoded.p_prime}XZ"}
        elif args.kind == "game2pvpda":
            encoded = game_to_pvpda(parse_game(_read(args.input)))
            text = render_ppda(encoded.spec, comment=f"compare {encoded.left} with {encoded.right}")
            record = {"command": "gadget", "kind": args.kind, "left": str(encoded.left),
                      "right": str(encoded.right)}
        else:
            build = and_demo if args.kind == "and-demo" else or_demo
            plts, s, s_prime = build(not args.t1_differs, not args.t2_differs)
            same = bisimulation_partition(plts).same(s, s_prime)
            text = render_ppda(embed_plts(plts), comment=f"{s} ~ {s_prime}: {same}")
            record = {"command": "gadget", "kind": args.kind, "bisimilar": same}
        return _done(EXIT_OK, [text.rstrip("\n")], record)
    except (BisimError, OSError, ValueError) as e:
        return _failure(f"build {args.kind}", e)


def run_difftest_command(args):
    try:
        results = run_difftest(args.seed, args.count, args.suite or None)
        mismatches = sum(len(r.mismatches) for r in results)
        lines = [f"seed: {args.seed}", summary_table(results).to_string(index=False)]
        lines += [f"{r.name}: {m}" for r in results for m in r.mismatches]
        record = {"command": "difftest", "seed": args.seed, "count": args.count,
                  "suites": [r.as_row() for r in results]}
        return _done(EXIT_NOT_BISIMILAR if mismatches else EXIT_OK, lines, record)
    except BisimError as e:
        return _failure("run difftest", e)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit one JSON record instead of text")
    common.add_argument("--cap", type=int, default=None, help="exploration cap (overrides BISIM_EXPLORATION_CAP)")

    parser = _Parser(prog="bisim", description="Bisimilarity toolkit for probabilistic pushdown automata",
                     epilog=ENVIRONMENT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = commands.add_parser("validate", parents=[common], help="check well-formedness")
    p.add_argument("automaton")
    p.set_defaults(handler=run_validate)

    p = commands.add_parser("classify", parents=[common], help="list the subclasses an automaton belongs to")
    p.add_argument("automaton")
    p.set_defaults(handler=run_classify)

    p = commands.add_parser("check", parents=[common], help="bounded bisimilarity of two configurations")
    p.add_argument("automaton")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--dump", action="store_true", help="print the explored ball with its ~_n blocks")
    p.add_argument("--dot", action="store_true", help="print the explored ball as a graphviz digraph")
    p.set_defaults(handler=run_check)

    p = commands.add_parser("reduce", parents=[common], help="encode probabilities as actions")
    p.add_argument("automaton")
    p.add_argument("--visibly", action="store_true")
    p.add_argument("--stats", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(handler=run_reduce)

    p = commands.add_parser("vpda-decide", parents=[common], help="exact bisimilarity of visibly automata")
    p.add_argument("automaton")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--dump-forcing", action="store_true")
    p.add_argument("--certificate", action="store_true", help="print the Attacker strategy annotations")
    p.set_defaults(handler=run_vpda_decide)

    p = commands.add_parser("oca-analyze", parents=[common], help="INC, dist, grid fixpoint and certificates")
    p.add_argument("automaton")
    p.add_argument("left", nargs="?")
    p.add_argument("right", nargs="?")
    p.add_argument("--dist", type=int, default=None, help="print dist for counters 0..N")
    p.add_argument("--k-depth", type=int, default=None)
    p.add_argument("--dist-budget", type=int, default=None)
    p.add_argument("--m-max", type=int, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--verify", default=None, help="YAML certificate to verify")
    p.add_argument("--belt", action="append", default=[], help="c/d:offset:thickness; emits a certificate")
    p.add_argument("--psi", type=int, default=None)
    p.set_defaults(handler=run_oca_analyze)

    p = commands.add_parser("gadget", parents=[common], help="hardness constructions")
    p.add_argument("kind", choices=["afa2poca", "game2pvpda", "and-demo", "or-demo"])
    p.add_argument("input", nargs="?")
    p.add_argument("--t1-differs", action="store_true")
    p.add_argument("--t2-differs", action="store_true")
    p.set_defaults(handler=run_gadget)

    p = commands.add_parser("difftest", parents=[common], help="randomised differential tests")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--suite", action="append", choices=SUITES)
    p.set_defaults(handler=run_difftest_command)
    return parser


def _emit(report, as_json):
    if "Error" in report:
        if as_json:
            print(json.dumps({"error": report["Error"], "code": report.get("Code", "USAGE")}, sort_keys=True))
        else:
            print(report["Error"], file=sys.stderr)
        return
    if as_json:
        print(json.dumps(report["Record"], sort_keys=True))
    else:
        for line in report["Lines"]:
            print(line)


def run(argv=None):
    """Parse argv, run one subcommand and return its exit status."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return e.code or EXIT_OK
    configure_logging(args.log_level)
    if args.command == "gadget" and args.kind in ("afa2poca", "game2pvpda") and not args.input:
        print(f"usage error: gadget {args.kind} needs an input file", file=sys.stderr)
        return EXIT_USAGE
    report = args.handler(args)
    _emit(report, args.json)
    return report["Status"]


if __name__ == "__main__":
    sys.exit(run())
