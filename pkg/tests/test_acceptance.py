"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Runs under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import random
import sys
import tempfile
import time
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from cosprover.backends import CheckRequest, MockChecker, ReplayGenerator, Cassette, TracingChecker  # noqa: E402
from cosprover.chain import ChainOfStates, length_filter, load_problems  # noqa: E402
from cosprover.cli import main as cli_main  # noqa: E402
from cosprover.common_prover import try_schedule  # noqa: E402
from cosprover.evalbench import bench_problem, parse_verdict  # noqa: E402
from cosprover.extraction import extract_tree, read_tree  # noqa: E402
from cosprover.orchestrator import RunConfig, safe_translate, translate  # noqa: E402
from cosprover.state import TERMINAL, parse_state, render_state  # noqa: E402
from cosprover.transform import GLUE_APPLY, GLUE_CLOSE, higher_order_reduce  # noqa: E402

from propositional import parse_theorem, random_pair, state_text, step_formula, tautology  # noqa: E402
from scenarios import always_failing, branches  # noqa: E402
from transcripts import TRANSCRIPTS  # noqa: E402

FIXTURES = HERE / "fixtures"
RESULTS: dict[int, str] = {}


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_1_budget_ceiling():
    prob, gen, chk = always_failing()
    cfg = RunConfig(n_cos=20, n_rounds=10, max_pairs=15, tries_per_pair=32)
    t0 = time.perf_counter()
    res = translate(prob, cfg, gen, chk)
    elapsed = time.perf_counter() - t0
    calls = res.ledger.generator_calls
    ok = cfg.ceiling == 9600 and calls <= cfg.ceiling and elapsed < 10 and res.status.value == "exhausted"
    report(1, ok, f"always-failing run made {calls} generator calls (ceiling {cfg.ceiling}) in {elapsed:.2f}s")


def test_criterion_2_replay_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        dumps = []
        for name in ("first", "second"):
            out = Path(tmp) / name
            cli_main(
                [
                    "translate",
                    "--problems", str(FIXTURES / "ten_problems.jsonl"),
                    "--cassette", str(FIXTURES / "ten_cassette.jsonl"),
                    "--scenario", str(FIXTURES / "ten_scenario.json"),
                    "--config", str(FIXTURES / "ten_config.json"),
                    "--out", str(out),
                ]
            )
            files = sorted([*out.glob("results/*.json"), *out.glob("proofs/*.lean")])
            dumps.append({p.relative_to(out).as_posix(): p.read_bytes() for p in files})
    ok = dumps[0] == dumps[1] and sum(k.startswith("results/") for k in dumps[0]) == 10
    report(2, ok, f"{len(dumps[0])} result/proof files byte-identical across two replay runs")


def test_criterion_3_branch_suite():
    t0 = time.perf_counter()
    matched, names = 0, []
    for b in branches():
        res = translate(b.problem, b.cfg, b.generator, b.checker)
        good = (
            res.status.value == b.status
            and [x.origin.value for x in res.blocks or []] == b.origins
            and res.ledger.generator_calls == b.generator_calls
            and all(b.generator.count(t) == n for t, n in b.templates.items())
            and (b.chain_len is None or len(res.chain) == b.chain_len)
        )
        matched += good
        if not good:
            names.append(b.name)
    elapsed = time.perf_counter() - t0
    ok = matched == 5 and elapsed < 5
    report(3, ok, f"{matched}/5 scripted branches match their hand traces in {elapsed:.2f}s" + (f" (mismatch: {names})" if names else ""))


def test_criterion_4_parser_roundtrip():
    text = (FIXTURES / "state_corpus.txt").read_text(encoding="utf-8")
    blocks = [b.strip("\n") for b in text.split("\n=====\n") if b.strip() and b.strip() != "====="]
    good = 0
    for block in blocks:
        state = parse_state(block)
        good += parse_state(render_state(state)) == state
    ok = len(blocks) >= 50 and good == len(blocks)
    report(4, ok, f"{good}/{len(blocks)} corpus states survive parse-render-parse")


def _main_chain(name: str) -> ChainOfStates:
    pairs = extract_tree(read_tree(FIXTURES / "trees" / f"{name}.json"))
    return next(p.chain for p in pairs if p.provenance["role"] == "main")


def test_criterion_5_extraction_goldens():
    four = _main_chain("term_in_tactic")
    three = _main_chain("term_based_proof")
    added4 = [h.render() for h in four.states[2].main_goal.hypotheses[-2:]]
    added3 = three.states[1].main_goal.hypotheses[-1].render()
    goldens = (
        len(four) == 4
        and [h.split(" : ")[1] for h in added4] == ["a ^ 2 ≥ 0", "b ^ 2 ≥ 0"]
        and len(three) == 3
        and added3 == "h₀ : ∃ k, x + 2 = 2 * k"
    )
    rng = random.Random(5)
    mixed = []
    for i in range(100):
        n = rng.randint(1, 6)
        states = tuple(parse_state(f"x : ℕ\n⊢ x = {k}") for k in range(n - 1)) + (TERMINAL,)
        mixed.append(ChainOfStates(states))
    kept = length_filter(mixed)
    short = sum(len(c) <= 2 for c in mixed)
    filtered = all(len(c) > 2 for c in kept) and len(kept) == 100 - short
    report(5, goldens and filtered, f"golden chains have {len(four)} and {len(three)} states; filter dropped {short}/100 short chains")


def test_criterion_6_reduction_oracle():
    rng = random.Random(6)
    agree = glue_ok = 0
    valid = 0
    for i in range(100):
        pair = random_pair(rng, valid=i % 2 == 0)
        red = higher_order_reduce(parse_state(state_text(pair[0], pair[1])), parse_state(state_text(pair[2], pair[3])))
        oracle = tautology(step_formula(*pair))
        valid += oracle
        agree += tautology(parse_theorem(red.subproblem)) == oracle
        glue_ok += (
            len(red.glue) == 3
            and red.glue[0].startswith("have t_new : (")
            and red.glue[0].endswith(":= tactics_new")
            and red.glue[1:] == (GLUE_APPLY, GLUE_CLOSE)
        )
    ok = agree == 100 and glue_ok == 100
    report(6, ok, f"{agree}/100 reductions agree with the truth table ({valid} valid steps); glue exact {glue_ok}/100")


def test_criterion_7_common_prover_trace():
    st = "theorem cp (x : ℕ) (h₀ : x + 3 = 5) : x = 2 := by sorry"
    s0 = parse_state("x : ℕ\nh₀ : x + 3 = 5\n⊢ x = 2")
    only_omega = TracingChecker(MockChecker().on(st, ["omega"], "No goals"))
    try_schedule(s0, TERMINAL, st, (), only_omega)
    trace = [t[-1] for _, t in only_omega.calls]
    nothing = TracingChecker(MockChecker())
    try_schedule(s0, TERMINAL, st, (), nothing)
    singles = sum(cmd == "apply" for cmd, _ in nothing.calls)
    suggests = sum(cmd == "suggest" for cmd, _ in nothing.calls)
    ok = trace == ["nlinarith", "linarith", "aesop", "omega"] and singles == 8 and suggests <= 6
    report(7, ok, f"omega trace {trace}; with nothing closing {singles} singles + {suggests} suggest calls")


def test_criterion_8_validation_harness():
    correct = sum(parse_verdict(text) is verdict for text, verdict in TRANSCRIPTS)
    from test_evalbench import PROB, pass_at_five_generator

    outcome = bench_problem(PROB, 5, pass_at_five_generator(), MockChecker())
    pattern = (outcome.passed_at(1), outcome.passed_at(5)) == (False, True)
    monotone = all(outcome.passed_at(k) <= outcome.passed_at(k + 1) for k in range(1, 5))
    ok = correct == len(TRANSCRIPTS) == 20 and pattern and monotone
    report(8, ok, f"{correct}/{len(TRANSCRIPTS)} verdicts parsed; pass@1={outcome.passed_at(1)} pass@5={outcome.passed_at(5)}")


def _proof_lines(proof_text: str) -> tuple[str, ...]:
    body = proof_text.splitlines()[1:]
    return tuple(line[2:] for line in body if not line.startswith("--"))


def test_criterion_9_end_to_end_reverification():
    proved = verified = 0
    for stem, config in (("ten", "ten_config.json"), ("induction", None)):
        cfg = RunConfig(**json.loads((FIXTURES / config).read_text())["run"]) if config else RunConfig()
        checker = MockChecker.load(FIXTURES / f"{stem}_scenario.json")
        cassette = Cassette.load(FIXTURES / f"{stem}_cassette.jsonl")
        for prob in load_problems(FIXTURES / f"{stem}_problems.jsonl"):
            res = safe_translate(prob, cfg, ReplayGenerator(cassette), checker)
            if res.status.value != "proved":
                continue
            proved += 1
            resp = checker.check(CheckRequest(prob.formal_statement, (), _proof_lines(res.proof_text)))
            verified += resp.ok and resp.state.is_terminal
    ok = proved > 0 and verified == proved
    report(9, ok, f"{verified}/{proved} proved fixtures replay to the terminal state")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
