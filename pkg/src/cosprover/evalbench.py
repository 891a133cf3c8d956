"""Chain-quality benchmark: judge verdicts, elaboration checks, pass@k."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from .backends.checker import Checker, CheckRequest
from .backends.generator import GenRequest, Generator
from .backends.templates import TemplateId
from .chain import ChainOfStates, Problem, dedup, parse_cos, render_cos, state_to_statement
from .errors import BackendUnavailable, CosProverError, TokenBudgetExceeded

_VERDICT = re.compile(r"@@@RESULT@@@\s*(True|False)\s*@@@", re.IGNORECASE)


@dataclass
class ValidationReport:
    problem_id: str
    semantic_pass: bool
    syntactic_pass: bool
    judge_transcript: str = ""
    failed_state_index: int | None = None
    reason: str = ""

    @property
    def overall(self) -> bool:
        return self.semantic_pass and self.syntactic_pass

    def to_json(self) -> dict:
        out = asdict(self)
        out["overall"] = self.overall
        return out


def parse_verdict(transcript: str) -> bool | None:
    """Verdict of the last ``@@@RESULT@@@…@@@`` marker, ``None`` if absent."""
    matches = _VERDICT.findall(transcript)
    if not matches:
        return None
    return matches[-1].lower() == "true"


def semantic_check(
    problem: Problem, chain: ChainOfStates, generator: Generator, temperature: float = 1.0
) -> tuple[bool, str]:
    """One judge call; passes iff the transcript's last marker says True."""
    slots = {
        "formal_statement": problem.formal_statement,
        "informal_proof": problem.informal_proof,
        "chain": render_cos(chain),
    }
    req = GenRequest(TemplateId.SEMANTIC_JUDGE, slots, temperature, scope=problem.id)
    transcript = generator.generate(req)
    return parse_verdict(transcript) is True, transcript


def syntactic_check(chain: ChainOfStates, checker: Checker) -> tuple[bool, int | None]:
    """Elaborate every non-terminal state as a standalone statement."""
    for k, state in enumerate(chain.states):
        if state.is_terminal:
            continue
        resp = checker.check(CheckRequest(state_to_statement(state, f"cos_state_{k}")))
        if not resp.ok:
            return False, k
    return True, None


def validate_chain(problem: Problem, chain: ChainOfStates, generator: Generator, checker: Checker) -> ValidationReport:
    syntactic, failed = syntactic_check(chain, checker)
    try:
        semantic, transcript = semantic_check(problem, chain, generator)
        reason = "" if parse_verdict(transcript) is not None else "NoMarker: judge gave no verdict"
    except (BackendUnavailable, TokenBudgetExceeded) as exc:
        semantic, transcript, reason = False, "", f"judge unavailable: {exc}"
    if not syntactic and not reason:
        reason = f"state {failed} does not elaborate"
    return ValidationReport(problem.id, semantic, syntactic, transcript, failed, reason)


@dataclass
class ProblemOutcome:
    problem_id: str
    split: str
    reports: list[ValidationReport] = field(default_factory=list)
    generator_calls: int = 0
    checker_calls: int = 0

    @property
    def first_pass(self) -> int | None:
        return next((i for i, r in enumerate(self.reports) if r.overall), None)

    def passed_at(self, k: int) -> bool:
        first = self.first_pass
        return first is not None and first < k

    def to_json(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "split": self.split,
            "first_pass": self.first_pass,
            "generator_calls": self.generator_calls,
            "checker_calls": self.checker_calls,
            "reports": [r.to_json() for r in self.reports],
        }


class _Counter(Checker):
    def __init__(self, inner: Checker):
        self.inner = inner
        self.calls = 0

    def check(self, req):
        self.calls += 1
        return self.inner.check(req)


class _CountingGenerator(Generator):
    def __init__(self, inner: Generator):
        self.inner = inner
        self.calls = 0

    def generate(self, req):
        self.calls += 1
        return self.inner.generate(req)


def bench_problem(problem: Problem, k: int, generator: Generator, checker: Checker, temperature: float = 1.0) -> ProblemOutcome:
    """Sample ``k`` chains and validate each one; nothing is skipped after a pass."""
    gen, chk = _CountingGenerator(generator), _Counter(checker)
    outcome = ProblemOutcome(problem.id, problem.split.value)
    slots = {
        "formal_statement": problem.formal_statement,
        "informal_proof": problem.informal_proof,
        "detailed_informal_proof": problem.informal_proof,
    }
    for _ in range(k):
        try:
            text = gen.generate(GenRequest(TemplateId.COS_GENERATE, slots, temperature, scope=problem.id))
            chain = dedup(parse_cos(text))
        except (BackendUnavailable, TokenBudgetExceeded) as exc:
            outcome.reports.append(ValidationReport(problem.id, False, False, reason=f"generator unavailable: {exc}"))
            continue
        except (CosProverError, ValueError) as exc:
            outcome.reports.append(ValidationReport(problem.id, False, False, reason=f"unparseable chain: {exc}"))
            continue
        outcome.reports.append(validate_chain(problem, chain, gen, chk))
    outcome.generator_calls, outcome.checker_calls = gen.calls, chk.calls
    return outcome


@dataclass
class BenchmarkSummary:
    k: int
    outcomes: list[ProblemOutcome]

    def rates(self, problems: list[ProblemOutcome]) -> dict[str, float]:
        n = len(problems)
        return {f"pass@{j}": (100.0 * sum(o.passed_at(j) for o in problems) / n if n else 0.0) for j in range(1, self.k + 1)}

    def by_split(self) -> dict[str, list[ProblemOutcome]]:
        groups: dict[str, list[ProblemOutcome]] = {}
        for o in self.outcomes:
            groups.setdefault(o.split, []).append(o)
        return dict(sorted(groups.items()))

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "splits": {s: {"problems": len(g), **self.rates(g)} for s, g in self.by_split().items()},
            "overall": {"problems": len(self.outcomes), **self.rates(self.outcomes)},
            "generator_calls": sum(o.generator_calls for o in self.outcomes),
            "checker_calls": sum(o.checker_calls for o in self.outcomes),
            "problems": [o.to_json() for o in self.outcomes],
        }

    def table(self) -> str:
        cols = ["split", "n"] + [f"pass@{j}" for j in range(1, self.k + 1)]
        rows = [[s, str(len(g))] + [f"{v:.2f}%" for v in self.rates(g).values()] for s, g in self.by_split().items()]
        rows.append(["all", str(len(self.outcomes))] + [f"{v:.2f}%" for v in self.rates(self.outcomes).values()])
        widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
        fmt = "  ".join(f"{{:<{w}}}" if i == 0 else f"{{:>{w}}}" for i, w in enumerate(widths))
        lines = [fmt.format(*cols)] + [fmt.format(*r) for r in rows]
        data = self.to_json()
        lines.append(f"generator calls: {data['generator_calls']}  checker calls: {data['checker_calls']}")
        return "\n".join(lines) + "\n"


def run_benchmark(
    problems: list[Problem], k: int, generator: Generator, checker: Checker, jobs: int = 1, temperature: float = 1.0
) -> BenchmarkSummary:
    if k < 1:
        raise ValueError("k must be >= 1")
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(lambda p: bench_problem(p, k, generator, checker, temperature), problems))
    return BenchmarkSummary(k, outcomes)


def write_report(summary: BenchmarkSummary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary.to_json(), fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
