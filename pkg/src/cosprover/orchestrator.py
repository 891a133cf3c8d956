"""The translation control loop.

``translate`` rewrites the informal proof, samples candidate chains of
states, and walks each chain pair by pair: common prover first, then a
primary model call, one error-feedback regeneration (ETR), and one
error-state renewal (ESR) that retargets the pair to ``No goals``. The
first fully bridged chain that re-verifies end to end wins.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

from .backends.checker import Checker, CheckRequest, CheckResponse
from .backends.generator import GenRequest, Generator, extract_tactics
from .backends.templates import TACTIC_TEMPLATES, TemplateId
from .chain import (
    ChainOfStates,
    ChainSource,
    Problem,
    check_complete,
    dedup,
    parse_cos,
    trivial_chain,
)
from .common_prover import TacticSchedule, try_schedule
from .errors import (
    BackendUnavailable,
    BudgetExhausted,
    CosProverError,
    MalformedState,
    NoCodeBlock,
    NoStatesFound,
    NonMonotonicIndex,
    StatementRejected,
    TokenBudgetExceeded,
)
from .state import TERMINAL, ProofState, render_state, states_equal
from .transform import Origin, ReductionKind, TacticBlock, assemble_proof, reduce_pair

log = logging.getLogger(__name__)

DIFFERENCE_HINTS = """\
- Proof by exhaustion (number theory over ℕ with bounded variables): first pin every variable to a finite range, then check all cases (for example with interval_cases) instead of a number-theoretic argument.
- Proof by calculation (divisor sums, concrete numerals): evaluate the quantity directly (norm_num, decide, rfl) instead of using closed-form formulas.
- Type transformation (algebra mixing ℝ and ℕ): state the type of every numeral and make each cast between ℕ, ℤ and ℝ explicit.
- Logical leaps (steps resting on secondary results): write every omitted intermediate fact as its own step with its justification."""


@dataclass(frozen=True)
class RunConfig:
    n_cos: int = 20
    n_rounds: int = 10
    max_pairs: int = 15
    tries_per_pair: int = 32
    trivial_chain_primary_calls: int = 16
    trivial_chain_regens: int = 2
    etr_per_failure: int = 1
    esr_per_failure: int = 1
    cos_regens: int = 1
    skip_ahead: bool = True
    use_rewrite: bool = True
    use_reductions: bool = False
    temperature: float = 1.0
    retry_temperature: float = 1.0
    max_tokens: int = 8192
    schedule: TacticSchedule = field(default_factory=TacticSchedule)

    def __post_init__(self):
        if isinstance(self.schedule, dict):
            object.__setattr__(self, "schedule", TacticSchedule(**self.schedule))
        counts = ("n_cos", "n_rounds", "max_pairs", "tries_per_pair", "trivial_chain_primary_calls")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("trivial_chain_regens", "etr_per_failure", "esr_per_failure", "cos_regens"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_cos < 2:
            raise ValueError("n_cos must be >= 2 (one slot is the trivial chain)")

    @property
    def ceiling(self) -> int:
        return self.n_cos * self.max_pairs * self.tries_per_pair

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class BudgetLedger:
    """Per-problem call accounting.

    ``generator_calls`` counts tactic-synthesis calls only; the ceiling is
    ``n_cos × max_pairs × tries_per_pair``. Rewrite, chain-sampling and
    judge calls are tallied in ``auxiliary_calls``.
    """

    ceiling: int
    tries_per_pair: int
    generator_calls: int = 0
    checker_calls: int = 0
    auxiliary_calls: int = 0
    per_pair_calls: dict[str, int] = field(default_factory=dict)
    exhausted: bool = False

    def pair_remaining(self, pair: str) -> int:
        return self.tries_per_pair - self.per_pair_calls.get(pair, 0)

    def charge_generator(self, pair: str) -> None:
        if self.generator_calls + 1 > self.ceiling:
            self.exhausted = True
            raise BudgetExhausted(f"generator ceiling {self.ceiling} reached")
        self.generator_calls += 1
        self.per_pair_calls[pair] = self.per_pair_calls.get(pair, 0) + 1
        assert self.generator_calls <= self.ceiling

    def to_json(self) -> dict:
        return {
            "ceiling": self.ceiling,
            "generator_calls": self.generator_calls,
            "checker_calls": self.checker_calls,
            "auxiliary_calls": self.auxiliary_calls,
            "per_pair_calls": dict(sorted(self.per_pair_calls.items())),
            "exhausted": self.exhausted,
        }


class Status(str, Enum):
    PROVED = "proved"
    EXHAUSTED = "exhausted"
    ERROR = "error"


@dataclass
class TranslationResult:
    problem_id: str
    status: Status
    ledger: BudgetLedger
    chain: ChainOfStates | None = None
    blocks: list[TacticBlock] | None = None
    proof_text: str | None = None
    chain_index: int | None = None
    error: str | None = None
    trace: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.status is Status.PROVED:
            assert self.chain is not None and self.blocks is not None and self.proof_text is not None
            assert len(self.blocks) == len(self.chain) - 1

    def to_json(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "status": self.status.value,
            "chain_index": self.chain_index,
            "chain": self.chain.to_json() if self.chain else None,
            "blocks": [b.to_json() for b in self.blocks] if self.blocks is not None else None,
            "proof_text": self.proof_text,
            "error": self.error,
            "ledger": self.ledger.to_json(),
            "trace": self.trace,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


_PARSE_ERRORS = (NoStatesFound, NonMonotonicIndex, MalformedState, ValueError)
_BACKEND_ERRORS = (BackendUnavailable, TokenBudgetExceeded)


class ProblemRun:
    """Mutable per-problem state: ledger, trace, and backend handles."""

    def __init__(
        self,
        problem: Problem,
        cfg: RunConfig,
        generator: Generator,
        checker: Checker,
        on_event: Callable[[dict], None] | None = None,
    ):
        self.problem = problem
        self.cfg = cfg
        self.generator = generator
        self.checker = checker
        self.ledger = BudgetLedger(cfg.ceiling, cfg.tries_per_pair)
        self.trace: list[dict] = []
        self.on_event = on_event
        self._common_cache: dict[tuple, TacticBlock | None] = {}
        self.where: dict = {}

    @property
    def statement(self) -> str:
        return self.problem.formal_statement

    def event(self, event: str, **detail) -> None:
        record = {"event": event, **self.where, **detail}
        self.trace.append(record)
        if self.on_event is not None:
            self.on_event({"problem_id": self.problem.id, **record})

    def generate(self, template: TemplateId, slots: dict[str, str], pair: str | None = None, retry: bool = False) -> str:
        if template in TACTIC_TEMPLATES:
            self.ledger.charge_generator(pair or "?")
        else:
            self.ledger.auxiliary_calls += 1
        temperature = self.cfg.retry_temperature if retry else self.cfg.temperature
        req = GenRequest(template, slots, temperature, self.cfg.max_tokens, scope=self.problem.id)
        try:
            text = self.generator.generate(req)
        except _BACKEND_ERRORS as exc:
            self.event("generate", template_id=template.value, outcome=f"backend_error: {exc}")
            raise
        self.event("generate", template_id=template.value, outcome="ok")
        return text

    def check(self, prefix: tuple[str, ...], tactics: tuple[str, ...]) -> CheckResponse:
        self.ledger.checker_calls += 1
        resp = self.checker.check(CheckRequest(self.statement, prefix, tactics))
        outcome = "ok" if resp.ok else resp.error_kind.value
        self.event("check", tactics=len(prefix) + len(tactics), outcome=outcome)
        return resp

    def common(self, prev: ProofState, target: ProofState, prefix: tuple[str, ...], accept, accept_key) -> TacticBlock | None:
        key = (prefix, render_state(prev), accept_key)
        if key in self._common_cache:
            return self._common_cache[key]
        counter = _CountingChecker(self.checker, self.ledger)
        block = try_schedule(prev, target, self.statement, prefix, counter, self.cfg.schedule, accept)
        if block is None and self.cfg.use_reductions:
            block = self._reduced_common(prev, target, prefix, accept, counter)
        self.event("common_prover", calls=counter.calls, outcome="ok" if block else "fail")
        self._common_cache[key] = block
        return block

    def _reduced_common(self, prev, target, prefix, accept, counter) -> TacticBlock | None:
        if target.is_terminal:
            return None
        reduction = reduce_pair(prev, target)
        if reduction.kind is not ReductionKind.HYPOTHESIS_DELTA:
            return None
        for tactic in self.cfg.schedule.singles:
            block = reduction.fill([tactic])
            resp = counter.check(CheckRequest(self.statement, prefix, block.lines))
            if resp.ok and accept(resp.state):
                return TacticBlock(block.lines, Origin.GLUE, reached=resp.state)
        return None


class _CountingChecker(Checker):
    def __init__(self, inner: Checker, ledger: BudgetLedger):
        self.inner = inner
        self.ledger = ledger
        self.calls = 0

    def check(self, req):
        self.calls += 1
        self.ledger.checker_calls += 1
        return self.inner.check(req)

    def suggest(self, statement, prefix):
        self.calls += 1
        self.ledger.checker_calls += 1
        return self.inner.suggest(statement, prefix)


def rewrite_informal(problem: Problem, run: ProblemRun) -> str:
    """Lean-friendly rewrite of the informal proof; the original on failure."""
    slots = {
        "formal_statement": problem.formal_statement,
        "informal_proof": problem.informal_proof,
        "difference_hints": DIFFERENCE_HINTS,
    }
    try:
        text = run.generate(TemplateId.REWRITE_LEANFRIENDLY, slots)
    except _BACKEND_ERRORS as exc:
        log.warning("%s: rewrite failed (%s); using the original proof", problem.id, exc)
        return problem.informal_proof
    return text


def initial_state(run: ProblemRun) -> ProofState:
    resp = run.check((), ())
    if not resp.ok:
        raise StatementRejected(run.statement, resp.message)
    return resp.state


def generate_candidates(problem: Problem, rewritten: str, cfg: RunConfig, run: ProblemRun) -> list[ChainOfStates]:
    """``n_cos - 1`` sampled chains followed by the trivial chain.

    Each sample is deduplicated; an incomplete or unparseable sample is
    regenerated up to ``cos_regens`` times and then dropped. Chains longer
    than ``max_pairs`` transitions are dropped as well.
    """
    s0 = initial_state(run)
    slots = {
        "formal_statement": problem.formal_statement,
        "informal_proof": problem.informal_proof,
        "detailed_informal_proof": rewritten,
    }
    chains: list[ChainOfStates] = []
    for sample in range(cfg.n_cos - 1):
        run.where = {"sample": sample}
        for attempt in range(cfg.cos_regens + 1):
            try:
                chain = dedup(parse_cos(run.generate(TemplateId.COS_GENERATE, slots, retry=attempt > 0)))
            except _BACKEND_ERRORS:
                break
            except _PARSE_ERRORS as exc:
                run.event("cos_rejected", reason=type(exc).__name__)
                continue
            if not check_complete(chain) or len(chain) < 2 or chain.states[0].is_terminal:
                run.event("cos_rejected", reason="incomplete")
                continue
            if len(chain) - 1 > cfg.max_pairs:
                run.event("cos_rejected", reason="too_long", length=len(chain))
                break
            chains.append(chain)
            break
    run.where = {}
    chains.append(trivial_chain(s0))
    return chains


@dataclass
class _Attempt:
    lines: tuple[str, ...]
    response: CheckResponse | None
    diagnostic: str


def _attempt(run: ProblemRun, text: str, prefix: tuple[str, ...], origin: Origin) -> tuple[TacticBlock | None, _Attempt]:
    try:
        block = extract_tactics(text, origin)
    except NoCodeBlock as exc:
        return None, _Attempt((), None, f"syntax error: {exc}")
    resp = run.check(prefix, block.lines)
    if resp.ok:
        diag = "the tactics reached a different state:\n" + render_state(resp.state)
    else:
        diag = f"{resp.error_kind.value} error: {resp.message}"
    return TacticBlock(block.lines, origin, reached=resp.state), _Attempt(block.lines, resp, diag)


def bridge_pair(
    prev: ProofState,
    next: ProofState,
    run: ProblemRun,
    prefix: tuple[str, ...] = (),
    pair: str = "0:0",
    later: tuple[ProofState, ...] = (),
    trivial: bool = False,
) -> TacticBlock | None:
    """One attempt round for the pair ``(prev, next)``.

    ``later`` holds the chain states after ``next``; with skip-ahead on, a
    block landing on any of them is accepted. Returns the accepted block
    (its ``reached`` is the checker state) or ``None``.
    """
    if prev.is_terminal:
        raise ValueError("bridge_pair needs a non-terminal previous state")
    cfg = run.cfg
    targets = (next,) + (later if cfg.skip_ahead else ())

    def accept(state: ProofState) -> bool:
        return any(states_equal(state, t) for t in targets)

    accept_key = tuple(render_state(t) for t in targets)
    block = run.common(prev, next, prefix, accept, accept_key)
    if block is not None:
        return block

    def spend() -> bool:
        if run.ledger.pair_remaining(pair) <= 0:
            run.event("pair_budget_spent")
            return False
        return True

    before, after = render_state(prev), render_state(next)
    reached = prev

    def tried(block, attempt, origin_ok) -> bool:
        nonlocal reached
        if attempt.response is not None and attempt.response.ok:
            reached = attempt.response.state
        return block is not None and attempt.response.ok and origin_ok(attempt.response.state)

    try:
        if not spend():
            return None
        text = run.generate(TemplateId.TACTIC_PRIMARY, {"state_before": before, "state_after": after}, pair)
        block, last = _attempt(run, text, prefix, Origin.LLM)
        if tried(block, last, accept):
            return block

        regens = cfg.trivial_chain_regens if trivial else cfg.etr_per_failure
        for _ in range(regens):
            if not spend():
                return None
            slots = {
                "state_before": before,
                "state_after": after,
                "failed_tactics": "\n".join(last.lines) or "(no tactics extracted)",
                "error_message": last.diagnostic,
            }
            text = run.generate(TemplateId.TACTIC_ETR, slots, pair, retry=True)
            block, last = _attempt(run, text, prefix, Origin.LLM_ETR)
            if tried(block, last, accept):
                return block

        if trivial:
            return None
        for _ in range(cfg.esr_per_failure):
            if not spend():
                return None
            slots = {
                "state_a": before,
                "state_b": render_state(TERMINAL),
                "state_c": render_state(reached),
                "attempted_tactics": "\n".join(last.lines) or "(none)",
            }
            text = run.generate(TemplateId.TACTIC_ESR, slots, pair, retry=True)
            block, last = _attempt(run, text, prefix, Origin.LLM_ESR)
            if tried(block, last, lambda s: s.is_terminal):
                return block
    except BudgetExhausted:
        run.event("budget_exhausted")
        return None
    except _BACKEND_ERRORS:
        return None
    return None


def _attempt_chain(run: ProblemRun, ci: int, chain: ChainOfStates) -> tuple[ChainOfStates, list[TacticBlock]] | None:
    trivial = chain.source is ChainSource.TRIVIAL
    states = chain.states
    prefix: tuple[str, ...] = ()
    path = [states[0]]
    blocks: list[TacticBlock] = []
    j = 0
    while j < len(states) - 1:
        run.where = {**run.where, "pair": j}
        block = bridge_pair(states[j], states[j + 1], run, prefix, f"{ci}:{j}", states[j + 2 :], trivial)
        if block is None:
            run.event("pair_failed")
            return None
        blocks.append(block)
        prefix += block.lines
        reached = block.reached
        if reached.is_terminal:
            path.append(TERMINAL)
            return ChainOfStates(tuple(path), chain.source), blocks
        j = next(k for k in range(j + 1, len(states)) if states_equal(reached, states[k]))
        path.append(states[j])
    return None


def _reverify(run: ProblemRun, blocks: list[TacticBlock]) -> bool:
    lines = tuple(line for b in blocks for line in b.lines)
    resp = run.check((), lines)
    return resp.ok and resp.state.is_terminal


def translate(
    problem: Problem,
    cfg: RunConfig,
    generator: Generator,
    checker: Checker,
    on_event: Callable[[dict], None] | None = None,
) -> TranslationResult:
    run = ProblemRun(problem, cfg, generator, checker, on_event)

    def result(status: Status, **kw) -> TranslationResult:
        return TranslationResult(problem.id, status, run.ledger, trace=run.trace, **kw)

    try:
        rewritten = rewrite_informal(problem, run) if cfg.use_rewrite else problem.informal_proof
        chains = generate_candidates(problem, rewritten, cfg, run)
    except StatementRejected as exc:
        run.event("statement_rejected", message=exc.message)
        return result(Status.ERROR, error=str(exc))
    run.event("candidates", count=len(chains))

    for ci, chain in enumerate(chains):
        trivial = chain.source is ChainSource.TRIVIAL
        rounds = cfg.trivial_chain_primary_calls if trivial else cfg.n_rounds
        for r in range(rounds):
            run.where = {"chain": ci, "round": r}
            found = _attempt_chain(run, ci, chain)
            run.where = {"chain": ci, "round": r}
            if found is not None:
                path, blocks = found
                if _reverify(run, blocks):
                    run.where = {}
                    run.event("proved", chain=ci, round=r)
                    text = assemble_proof(problem, path, blocks)
                    return result(Status.PROVED, chain=path, blocks=blocks, proof_text=text, chain_index=ci)
                run.event("reverify_failed")
            if run.ledger.exhausted:
                run.where = {}
                return result(Status.EXHAUSTED, error="generator budget exhausted")
    run.where = {}
    return result(Status.EXHAUSTED)


def safe_translate(problem: Problem, cfg: RunConfig, generator: Generator, checker: Checker, on_event=None) -> TranslationResult:
    """``translate`` with unexpected package errors mapped to status=error.

    Cassette misses are re-raised: they mean the replay inputs are wrong,
    not that the problem failed.
    """
    from .errors import CassetteMiss, ProtocolError

    try:
        return translate(problem, cfg, generator, checker, on_event)
    except CassetteMiss:
        raise
    except (ProtocolError, CosProverError) as exc:
        ledger = BudgetLedger(cfg.ceiling, cfg.tries_per_pair)
        return TranslationResult(problem.id, Status.ERROR, ledger, error=f"{type(exc).__name__}: {exc}")
