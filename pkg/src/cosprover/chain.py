"""Chains of states, problems, and chain post-processing."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import NoStatesFound, NonMonotonicIndex, TerminalState
from .state import TERMINAL, ProofState, is_terminal_text, normalize_ws, parse_state, render_state, states_equal


class ChainSource(str, Enum):
    GENERATED = "generated"
    TRIVIAL = "trivial"
    EXTRACTED = "extracted"


@dataclass(frozen=True)
class ChainOfStates:
    states: tuple[ProofState, ...]
    source: ChainSource = ChainSource.GENERATED
    explanations: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "source", ChainSource(self.source))
        if self.explanations is not None:
            object.__setattr__(self, "explanations", tuple(self.explanations))
        if not self.states:
            raise ValueError("a chain needs at least one state")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def pairs(self) -> list[tuple[ProofState, ProofState]]:
        return list(zip(self.states, self.states[1:]))

    def to_json(self) -> dict:
        return {
            "source": self.source.value,
            "states": [render_state(s) for s in self.states],
            "explanations": list(self.explanations or ()),
        }

    @classmethod
    def from_json(cls, obj: dict) -> ChainOfStates:
        return cls(
            tuple(parse_state(s) for s in obj["states"]),
            ChainSource(obj.get("source", "generated")),
            tuple(obj["explanations"]) if obj.get("explanations") else None,
        )


def trivial_chain(initial: ProofState) -> ChainOfStates:
    return ChainOfStates((initial, TERMINAL), ChainSource.TRIVIAL)


class Split(str, Enum):
    TEST = "test"
    VALID = "valid"
    OTHER = "other"


@dataclass(frozen=True)
class Problem:
    id: str
    formal_statement: str
    informal_proof: str = ""
    split: Split = Split.OTHER

    def __post_init__(self):
        if not self.formal_statement.strip():
            raise ValueError(f"problem {self.id!r} has an empty formal statement")
        object.__setattr__(self, "split", Split(self.split))

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "formal_statement": self.formal_statement,
            "informal_proof": self.informal_proof,
            "split": self.split.value,
        }


def load_problems(path: str | Path) -> list[Problem]:
    problems, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            prob = Problem(
                id=str(obj["id"]),
                formal_statement=obj["formal_statement"],
                informal_proof=obj.get("informal_proof", ""),
                split=obj.get("split", "other"),
            )
            if prob.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate problem id {prob.id!r}")
            seen.add(prob.id)
            problems.append(prob)
    return problems


_HEADER = re.compile(r"^[ \t>*#]*State\s+(\d+)\s*:[ \t*]*", re.MULTILINE)


def parse_cos(generator_output: str) -> ChainOfStates:
    """Parse ``State <n>:`` blocks out of raw generator text.

    Prose between two blocks becomes the explanation of the transition
    into the later block; prose after the final block is dropped.
    """
    headers = list(_HEADER.finditer(generator_output))
    if not headers:
        raise NoStatesFound("no 'State <n>:' header in generator output")
    states, explanations = [], []
    for pos, match in enumerate(headers):
        index = int(match.group(1))
        if index != pos:
            raise NonMonotonicIndex(index, pos)
        end = headers[pos + 1].start() if pos + 1 < len(headers) else len(generator_output)
        body, prose = _split_body(generator_output[match.end():end])
        states.append(TERMINAL if is_terminal_text(body) else parse_state(_strip_fences(body)))
        if pos + 1 < len(headers):
            explanations.append(normalize_ws(_strip_fences(prose)))
    return ChainOfStates(tuple(states), ChainSource.GENERATED, tuple(explanations))


def _strip_fences(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.strip().startswith("```"))


def _split_body(segment: str) -> tuple[str, str]:
    """Separate a state body from the prose that follows it.

    A body is one or more goal blocks, each running through its ``⊢`` line
    plus indented continuation lines. The first line after that which is
    not another goal block starts the prose.
    """
    lines = segment.splitlines()
    i = 0
    while i < len(lines) and not lines[i].strip():
        i += 1
    if i < len(lines) and is_terminal_text(lines[i].strip().rstrip(".")):
        return lines[i].strip().rstrip("."), "\n".join(lines[i + 1:])
    body: list[str] = []
    while True:
        j = i
        while j < len(lines) and not lines[j].strip():
            j += 1
        k = j
        while k < len(lines) and lines[k].strip() and "⊢" not in lines[k]:
            k += 1
        if k >= len(lines) or not lines[k].strip():
            break
        k += 1
        while k < len(lines) and lines[k][:1].isspace() and lines[k].strip():
            k += 1
        if body:
            body.append("")
        body.extend(lines[j:k])
        i = k
    if not body:
        # no turnstile at all: hand the text to the state parser to report
        return segment.strip(), ""
    return "\n".join(body), "\n".join(lines[i:])


def render_cos(chain: ChainOfStates) -> str:
    """``State <n>:`` text that :func:`parse_cos` reads back into ``chain``."""
    expl = chain.explanations or ()
    parts = []
    for i, state in enumerate(chain.states):
        parts.append(f"State {i}:\n{render_state(state)}")
        if i < len(expl) and expl[i]:
            parts.append(expl[i])
    return "\n\n".join(parts) + "\n"


def dedup(chain: ChainOfStates) -> ChainOfStates:
    kept = [chain.states[0]]
    expl = list(chain.explanations) if chain.explanations is not None else None
    kept_expl: list[str] = []
    for i, state in enumerate(chain.states[1:]):
        if states_equal(kept[-1], state):
            continue
        kept.append(state)
        if expl is not None and i < len(expl):
            kept_expl.append(expl[i])
    return replace(
        chain,
        states=tuple(kept),
        explanations=tuple(kept_expl) if expl is not None else None,
    )


def check_complete(chain: ChainOfStates) -> bool:
    return chain.states[-1].is_terminal


def state_to_statement(state: ProofState, name: str = "aux") -> str:
    """Render the first goal of ``state`` as a standalone theorem header."""
    if state.is_terminal:
        raise TerminalState("cannot convert the terminal state into a statement")
    goal = state.main_goal
    binders = "".join(
        f" ({normalize_ws(h.name)} : {normalize_ws(h.statement)})" for h in goal.hypotheses
    )
    return f"theorem {name}{binders} : {normalize_ws(goal.target)} := by sorry"


def length_filter(chains: Iterable[ChainOfStates], min_states: int = 2) -> list[ChainOfStates]:
    """Keep chains with strictly more than ``min_states`` states."""
    if min_states < 1:
        raise ValueError("min_states must be >= 1")
    return [c for c in chains if len(c) > min_states]


def load_chains(path: str | Path) -> list[tuple[str, ChainOfStates]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append((str(obj["problem_id"]), ChainOfStates.from_json(obj)))
    return out


def dump_chain_record(problem_id: str, chain: ChainOfStates) -> str:
    return json.dumps({"problem_id": problem_id, **chain.to_json()}, ensure_ascii=False)
