"""Pair reductions, the implication glue script, and final proof assembly."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .chain import ChainOfStates, Problem, state_to_statement
from .errors import ArityMismatch, MultiGoal
from .state import Goal, Hypothesis, ProofState, normalize_ws, render_state, states_equal


class Origin(str, Enum):
    COMMON_PROVER = "common_prover"
    LLM = "llm"
    LLM_ETR = "llm_etr"
    LLM_ESR = "llm_esr"
    GLUE = "glue"
    EXTRACTED = "extracted"


@dataclass(frozen=True)
class TacticBlock:
    lines: tuple[str, ...]
    origin: Origin = Origin.LLM
    # checker-reported state after the block; not part of block identity
    reached: ProofState | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "origin", Origin(self.origin))
        if not self.lines:
            raise ValueError("a tactic block needs at least one line")
        if any(not line.strip() for line in self.lines):
            raise ValueError("tactic block contains a blank line")

    def to_json(self) -> dict:
        out = {"lines": list(self.lines), "origin": self.origin.value}
        if self.reached is not None:
            out["reached"] = render_state(self.reached)
        return out


class ReductionKind(str, Enum):
    HYPOTHESIS_DELTA = "hypothesis_delta"
    HIGHER_ORDER = "higher_order"
    DIRECT = "direct"


TACTICS_SLOT = "tactics_new"
GLUE_HEAD = "have t_new : ({new_hyps} → {new_target}) → {prev_target} := " + TACTICS_SLOT
GLUE_APPLY = "apply t_new"
GLUE_CLOSE = "repeat' assumption"


@dataclass(frozen=True)
class Reduction:
    kind: ReductionKind
    subproblem: str
    glue: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "glue", tuple(self.glue))
        if self.kind is not ReductionKind.DIRECT and not self.glue:
            raise ValueError(f"{self.kind.value} reduction needs glue")

    def fill(self, proof_lines: list[str] | tuple[str, ...]) -> TacticBlock:
        """Substitute a proof of the subproblem into the glue script."""
        if self.kind is ReductionKind.DIRECT:
            return TacticBlock(tuple(proof_lines), Origin.GLUE)
        proof = "by " + "; ".join(line.strip() for line in proof_lines)
        return TacticBlock(tuple(g.replace(TACTICS_SLOT, proof) for g in self.glue), Origin.GLUE)


def detect_hypothesis_delta(prev: ProofState, next: ProofState) -> Hypothesis | None:
    if prev.is_terminal or next.is_terminal or len(prev.goals) != len(next.goals):
        return None
    p, n = prev.main_goal, next.main_goal
    if len(n.hypotheses) != len(p.hypotheses) + 1:
        return None
    if normalize_ws(p.target) != normalize_ws(n.target):
        return None
    if not states_equal(ProofState((p,)), ProofState((Goal(n.hypotheses[:-1], n.target),))):
        return None
    if not states_equal(ProofState(prev.goals[1:]), ProofState(next.goals[1:])):
        return None
    return n.hypotheses[-1]


def _paren(text: str) -> str:
    return f"({normalize_ws(text)})"


def higher_order_reduce(prev: ProofState, next: ProofState, name: str = "adjacent_step") -> Reduction:
    """Reduce a single-goal pair to proving ``h_p → (h_n → τ_n) → τ_p``.

    Previous hypotheses are curried as dependent binders ``(h : P) →`` so
    that variable declarations stay well-typed. The antecedent conjoins the
    next-state hypotheses not already present in the previous state; the
    omitted ones are in scope, so the statement is equivalent to conjoining
    all of them.
    """
    if len(prev.goals) != 1 or len(next.goals) != 1:
        raise MultiGoal(f"higher-order reduction needs one goal per state, got {len(prev.goals)} and {len(next.goals)}")
    p, n = prev.main_goal, next.main_goal
    known = {(normalize_ws(h.name), normalize_ws(h.statement)) for h in p.hypotheses}
    new = [h for h in n.hypotheses if (normalize_ws(h.name), normalize_ws(h.statement)) not in known]
    new_hyps = " ∧ ".join(_paren(h.statement) for h in new) if new else "True"
    if len(new) > 1:
        new_hyps = f"({new_hyps})"
    antecedent = f"({new_hyps} → {_paren(n.target)})"
    binders = "".join(f"({normalize_ws(h.name)} : {normalize_ws(h.statement)}) → " for h in p.hypotheses)
    target = f"{binders}{antecedent} → {_paren(p.target)}"
    subproblem = f"theorem {name} : {target} := by sorry"
    glue = (
        GLUE_HEAD.format(new_hyps=new_hyps, new_target=_paren(n.target), prev_target=_paren(p.target)),
        GLUE_APPLY,
        GLUE_CLOSE,
    )
    return Reduction(ReductionKind.HIGHER_ORDER, subproblem, glue)


def hypothesis_delta_reduce(prev: ProofState, hyp: Hypothesis, name: str = "adjacent_step") -> Reduction:
    goal = prev.main_goal
    sub = ProofState((Goal(goal.hypotheses, hyp.statement),))
    glue = (f"have {normalize_ws(hyp.name)} : {normalize_ws(hyp.statement)} := {TACTICS_SLOT}",)
    return Reduction(ReductionKind.HYPOTHESIS_DELTA, state_to_statement(sub, name), glue)


def reduce_pair(prev: ProofState, next: ProofState, name: str = "adjacent_step") -> Reduction:
    hyp = detect_hypothesis_delta(prev, next)
    if hyp is not None:
        return hypothesis_delta_reduce(prev, hyp, name)
    if len(prev.goals) == 1 and len(next.goals) == 1:
        return higher_order_reduce(prev, next, name)
    return Reduction(ReductionKind.DIRECT, state_to_statement(prev, name))


_PROOF_SUFFIX = re.compile(r"\s*:=\s*(by\s*(sorry)?\s*|sorry\s*)?$")


def statement_header(formal_statement: str) -> str:
    """Strip a trailing ``:= by sorry`` (or similar) from a theorem header."""
    return _PROOF_SUFFIX.sub("", formal_statement.rstrip())


def assemble_proof(problem: Problem, chain: ChainOfStates, blocks: list[TacticBlock]) -> str:
    """Annotated Lean source: tactics interleaved with ``-- `` state comments."""
    transitions = len(chain) - 1
    if len(blocks) != transitions:
        raise ArityMismatch(f"{len(blocks)} blocks for {transitions} transitions")
    if not blocks and not chain.states[-1].is_terminal:
        raise ArityMismatch("no tactic blocks and the chain is not terminal")
    out = [statement_header(problem.formal_statement) + " := by"]
    for i, block in enumerate(blocks):
        out.extend(f"  {line}" for line in block.lines)
        reached = block.reached if block.reached is not None else chain.states[i + 1]
        if i + 1 < len(blocks) and not reached.is_terminal:
            out.extend(f"-- {line}" if line else "--" for line in render_state(reached).splitlines())
    out.append("-- No Goals")
    return "\n".join(out) + "\n"
