import json

import pytest
from hypothesis import given, strategies as st

from cosprover.backends import CheckResponse, ErrorKind, MockChecker, ScriptedGenerator
from cosprover.backends.checker import statement_to_state
from cosprover.chain import Problem, trivial_chain
from cosprover.evalbench import (
    BenchmarkSummary,
    ProblemOutcome,
    ValidationReport,
    bench_problem,
    parse_verdict,
    run_benchmark,
    semantic_check,
    syntactic_check,
    validate_chain,
    write_report,
)
from cosprover.state import render_state
from scenarios import cos
from transcripts import TRANSCRIPTS

ST = "theorem v (x : ℝ) (h₀ : x = 2) : x ^ 2 = 4 := by sorry"
S0 = statement_to_state(ST)
PROB = Problem("v", ST, "Square both sides.", "test")
GOOD = cos(render_state(S0), "x : ℝ\nh₀ : x = 2\n⊢ 2 ^ 2 = 4", "x : ℝ\nh₀ : x = 2\n⊢ 4 = 4", "No goals")

YES, NO = "@@@RESULT@@@True@@@", "@@@RESULT@@@False@@@"


@pytest.mark.parametrize("text,verdict", TRANSCRIPTS)
def test_parse_verdict(text, verdict):
    assert parse_verdict(text) is verdict


def test_transcript_suite_size():
    assert len(TRANSCRIPTS) == 20


class Counting(MockChecker):
    def __init__(self, fail_name=None):
        super().__init__()
        self.statements = []
        self.fail_name = fail_name

    def check(self, req):
        self.statements.append(req.statement)
        if self.fail_name and f" {self.fail_name} " in req.statement:
            return CheckResponse.failure(ErrorKind.SEMANTIC, "type mismatch")
        return super().check(req)


def test_trivial_chain_is_one_elaboration():
    chk = Counting()
    assert syntactic_check(trivial_chain(S0), chk) == (True, None)
    assert chk.statements == ["theorem cos_state_0 (x : ℝ) (h₀ : x = 2) : x ^ 2 = 4 := by sorry"]


def test_syntactic_failure_index():
    from cosprover.chain import parse_cos

    chk = Counting("cos_state_2")
    assert syntactic_check(parse_cos(GOOD), chk) == (False, 2)
    assert len(chk.statements) == 3


def test_semantic_check_slots():
    gen = ScriptedGenerator({"semantic_judge": ["reasoning\n" + YES]})
    ok, transcript = semantic_check(PROB, trivial_chain(S0), gen)
    assert ok and transcript.endswith(YES)
    slots = gen.calls[0].slots
    assert slots["formal_statement"] == ST
    assert slots["chain"].startswith("State 0:\n")


def test_validate_chain_reasons():
    chain = trivial_chain(S0)
    rep = validate_chain(PROB, chain, ScriptedGenerator({"semantic_judge": ["no verdict"]}), MockChecker())
    assert not rep.overall and rep.reason.startswith("NoMarker")
    rep = validate_chain(PROB, chain, ScriptedGenerator(), MockChecker())
    assert not rep.semantic_pass and "unavailable" in rep.reason
    rep = validate_chain(PROB, chain, ScriptedGenerator({"semantic_judge": [YES]}), Counting("cos_state_0"))
    assert (rep.semantic_pass, rep.syntactic_pass, rep.failed_state_index) == (True, False, 0)
    assert rep.reason == "state 0 does not elaborate"
    assert rep.to_json()["overall"] is False


def pass_at_five_generator():
    return ScriptedGenerator({"cos_generate": [GOOD] * 5, "semantic_judge": [NO, NO, NO, NO, YES]})


def test_pass_only_at_k5():
    out = bench_problem(PROB, 5, pass_at_five_generator(), MockChecker())
    assert out.first_pass == 4
    assert (out.passed_at(1), out.passed_at(5)) == (False, True)
    assert out.generator_calls == 10


def test_unparseable_samples_are_failures():
    gen = ScriptedGenerator({"cos_generate": ["no states", GOOD], "semantic_judge": [YES]})
    out = bench_problem(PROB, 2, gen, MockChecker())
    assert out.first_pass == 1
    assert "unparseable" in out.reports[0].reason


def test_summary_and_report(tmp_path):
    probs = [PROB, Problem("w", ST.replace("theorem v", "theorem w"), "", "valid")]
    gen = ScriptedGenerator(default=lambda r: GOOD if r.template_id.value == "cos_generate" else YES)
    summary = run_benchmark(probs, 2, gen, MockChecker(), jobs=2)
    data = summary.to_json()
    assert data["overall"]["pass@1"] == 100.0
    assert set(data["splits"]) == {"test", "valid"}
    table = summary.table()
    assert table.splitlines()[0].split() == ["split", "n", "pass@1", "pass@2"]
    assert "100.00%" in table
    write_report(summary, tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["k"] == 2
    with pytest.raises(ValueError):
        run_benchmark(probs, 0, gen, MockChecker())


@given(st.lists(st.lists(st.booleans(), min_size=5, max_size=5), min_size=1, max_size=8))
def test_pass_at_k_is_monotone(grid):
    outcomes = [
        ProblemOutcome(f"p{i}", "test", [ValidationReport(f"p{i}", ok, True) for ok in row]) for i, row in enumerate(grid)
    ]
    rates = BenchmarkSummary(5, outcomes).rates(outcomes)
    values = [rates[f"pass@{k}"] for k in range(1, 6)]
    assert values == sorted(values)
    assert values[-1] == 100.0 * sum(any(row) for row in grid) / len(grid)
