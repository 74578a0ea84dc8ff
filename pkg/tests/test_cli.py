import sys
import os
import json
import unittest.mock as mock

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.cli import run

SAMPLES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")
EXAMPLE1 = os.path.join(SAMPLES, "example1.ppda")
EXAMPLE1_POCA = os.path.join(SAMPLES, "example1_poca.ppda")

POPPING = """states: p
stack: X Y
actions: r i c
visibility: r=r int=i c=c
p X r -> 1 p .
p Y i -> 1 p Y
p Y c -> 1 p X Y
"""


class TestCheck:
    """Bounded bisimilarity from the command line"""

    def test_worked_pair(self, capsys):
        assert run(["check", EXAMPLE1, "pXZ", "rX", "--depth", "8"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "EQUIVALENT_AT(8)"
        assert lines[1] == "equivalent at depth 8 (bounded)"

    def test_depth_zero(self):
        assert run(["check", EXAMPLE1, "pXZ", "pXZ", "--depth", "0"]) == 0

    def test_distinguished(self, capsys):
        assert run(["check", EXAMPLE1, "pXZ", "qXZ", "--depth", "4"]) == 1
        assert capsys.readouterr().out.startswith("DISTINGUISHED_AT(2)")

    def test_json(self, capsys):
        assert run(["check", EXAMPLE1, "pXZ", "rX", "--depth", "3", "--json"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["equivalent"] is True
        assert record["verdict"] == "EQUIVALENT_AT(3)"

    def test_dump_and_dot(self, capsys):
        assert run(["check", EXAMPLE1, "pXZ", "rX", "--depth", "2", "--dump", "--dot"]) == 0
        out = capsys.readouterr().out
        assert "depth=0" in out
        assert "digraph" in out

    def test_budget(self):
        """Running out of budget is inconclusive"""
        assert run(["check", EXAMPLE1, "pXZ", "rX", "--depth", "8", "--cap", "5"]) == 2

    @mock.patch.dict(os.environ, {"BISIM_EXPLORATION_CAP": "5"})
    def test_budget_from_environment(self):
        assert run(["check", EXAMPLE1, "pXZ", "rX", "--depth", "8"]) == 2


class TestUsage:
    """Usage and parse errors exit with 3"""

    def test_missing_arguments(self, capsys):
        assert run(["check"]) == 3
        assert "usage error" in capsys.readouterr().err

    def test_no_command(self):
        assert run([]) == 3

    def test_help(self):
        assert run(["--help"]) == 0

    def test_missing_file(self, capsys):
        assert run(["check", "no-such-file.ppda", "pX", "pX"]) == 3
        assert "Failed to check configurations" in capsys.readouterr().err

    def test_parse_error(self, tmp_path, capsys):
        path = tmp_path / "bad.ppda"
        path.write_text("states: p\nstack: X\nactions: a\np X a -> half p .\n")
        assert run(["validate", str(path), "--json"]) == 3
        record = json.loads(capsys.readouterr().out)
        assert record["code"] == "PARSE"

    def test_bad_configuration(self):
        assert run(["check", EXAMPLE1, "pW", "rX"]) == 3


class TestValidateAndClassify:
    def test_validate_ok(self, capsys):
        assert run(["validate", EXAMPLE1]) == 0
        assert capsys.readouterr().out.strip() == "OK"

    def test_validate_issues(self, tmp_path, capsys):
        path = tmp_path / "sum.ppda"
        path.write_text("states: p\nstack: X\nactions: a\np X a -> 9/10 p .\n")
        assert run(["validate", str(path)]) == 1
        assert "9/10" in capsys.readouterr().out

    def test_classify(self, capsys):
        assert run(["classify", EXAMPLE1_POCA]) == 0
        assert capsys.readouterr().out.strip() == "fullyProbabilistic pOCA"


class TestOtherCommands:
    def test_reduce(self, capsys):
        assert run(["reduce", EXAMPLE1, "--stats"]) == 0
        out = capsys.readouterr().out
        assert "<d0>" in out
        assert "Within Bound" in out

    def test_reduce_output(self, tmp_path, capsys):
        target = tmp_path / "reduced.ppda"
        assert run(["reduce", EXAMPLE1, "--output", str(target)]) == 0
        assert target.read_text().startswith("# reduction of")

    def test_reduce_visibly_refused(self):
        assert run(["reduce", EXAMPLE1, "--visibly"]) == 3

    def test_vpda_decide(self, tmp_path, capsys):
        path = tmp_path / "popping.ppda"
        path.write_text(POPPING)
        assert run(["vpda-decide", str(path), "pX", "pY", "--dump-forcing", "--certificate"]) == 1
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "NOT_BISIMILAR"
        assert "Minimal Set" in out
        assert run(["vpda-decide", str(path), "pXY", "pXY"]) == 0

    def test_oca_analyze(self, capsys):
        assert run(["oca-analyze", EXAMPLE1_POCA, "pXZ", "qXZ", "--dist", "3"]) == 1
        out = capsys.readouterr().out
        assert "INC (3 member(s))" in out
        assert "NOT_BISIMILAR(2)" in out

    def test_oca_analyze_requires_poca(self):
        assert run(["oca-analyze", EXAMPLE1]) == 3

    def test_bad_belt(self):
        assert run(["oca-analyze", EXAMPLE1_POCA, "pXZ", "pXZ", "--belt", "diagonal"]) == 3

    def test_gadget_demos(self, capsys):
        assert run(["gadget", "and-demo"]) == 0
        assert "# s ~ s': True" in capsys.readouterr().out
        assert run(["gadget", "or-demo", "--t1-differs", "--t2-differs"]) == 0
        assert "# s ~ s': False" in capsys.readouterr().out

    def test_afa2poca(self, tmp_path, capsys):
        path = tmp_path / "one.afa"
        path.write_text("afa-states: q0\ninitial: q0\naccepting: q0\nq0 = q0 & q0\n")
        assert run(["gadget", "afa2poca", str(path)]) == 0
        assert capsys.readouterr().out.startswith("# compare p X Z with p' X Z")

    def test_gadget_needs_input(self):
        assert run(["gadget", "game2pvpda"]) == 3

    def test_difftest(self, capsys):
        assert run(["difftest", "--seed", "4", "--count", "5", "--suite", "lemma1"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "seed: 4"
        assert "lemma1" in out
