"""Goals, proof states and the infoview text format.

The infoview format is the interchange format for every other module::

    case inl
    x : ℝ
    h₀ : -1 < x
    ⊢ 0 ≤ x + 1

Goals are separated by blank lines; the zero-goal state is ``No goals``.
Parsing normalizes whitespace (runs collapse to one space) so that
``parse_state(render_state(s)) == s`` holds for every parsed state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MalformedState

TURNSTILE = "⊢"
TERMINAL_TEXT = "No goals"

_OPEN = "([{⟨"
_CLOSE = ")]}⟩"
_GOAL_COUNT = re.compile(r"^\d+ goals?$")
_NAME_STOP = set(":⊢()[]{}⟨⟩,")


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class Hypothesis:
    name: str
    statement: str

    def __post_init__(self):
        if not self.name.strip() or TURNSTILE in self.name:
            raise ValueError(f"invalid hypothesis name {self.name!r}")
        if not self.statement.strip():
            raise ValueError(f"hypothesis {self.name!r} has an empty statement")

    def render(self) -> str:
        return f"{normalize_ws(self.name)} : {normalize_ws(self.statement)}"


@dataclass(frozen=True)
class Goal:
    hypotheses: tuple[Hypothesis, ...] = ()
    target: str = ""
    case_label: str | None = None

    def __post_init__(self):
        if not self.target.strip():
            raise ValueError("goal target is empty")
        # accept lists from callers, store tuples
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))

    def with_hypothesis(self, hyp: Hypothesis) -> Goal:
        return Goal(self.hypotheses + (hyp,), self.target, self.case_label)

    def hypothesis_names(self) -> set[str]:
        names = set()
        for h in self.hypotheses:
            names.update(normalize_ws(h.name).split(" "))
        return names


@dataclass(frozen=True)
class ProofState:
    goals: tuple[Goal, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "goals", tuple(self.goals))

    @property
    def is_terminal(self) -> bool:
        return not self.goals

    @property
    def main_goal(self) -> Goal:
        return self.goals[0]

    def __str__(self) -> str:
        return render_state(self)


TERMINAL = ProofState(())


def is_terminal_text(text: str) -> bool:
    return normalize_ws(text).lower() == "no goals"


def depth_scan(text: str):
    """Yield ``(index, char, depth)`` with bracket depth before the char."""
    depth = 0
    for i, ch in enumerate(text):
        if ch in _CLOSE:
            depth = max(depth - 1, 0)
            yield i, ch, depth
            continue
        yield i, ch, depth
        if ch in _OPEN:
            depth += 1


def split_top_level(text: str, sep: str) -> list[str]:
    """Split ``text`` on ``sep`` occurrences at bracket depth 0."""
    parts, start = [], 0
    n = len(sep)
    for i, _ch, depth in depth_scan(text):
        if depth == 0 and i >= start and text.startswith(sep, i):
            parts.append(text[start:i])
            start = i + n
    parts.append(text[start:])
    return parts


def _looks_like_names(part: str) -> bool:
    tokens = part.split()
    if not tokens:
        return False
    for tok in tokens:
        if any(c in _NAME_STOP for c in tok):
            return False
        if not (tok[0].isalpha() or tok[0] == "_"):
            return False
    return True


def split_head(line: str) -> tuple[str, str] | None:
    """Split ``name : statement`` at the first top-level `` : ``."""
    pieces = split_top_level(line, " : ")
    if len(pieces) < 2:
        return None
    name = pieces[0].strip()
    if not _looks_like_names(name):
        return None
    statement = " : ".join(pieces[1:]).strip()
    if not statement:
        return None
    return name, statement


def _split_inline_goal(line: str) -> list[str]:
    """Expand the one-line ``a : ℝ, h : P ⊢ Q`` form into infoview lines."""
    pieces = split_top_level(line, TURNSTILE)
    if len(pieces) != 2 or not pieces[0].strip():
        return [line]
    hyps: list[str] = []
    for seg in split_top_level(pieces[0], ","):
        seg = seg.strip()
        if not seg:
            continue
        if hyps and split_head(seg) is None:
            # comma inside a binder such as `∃ k, x = 2 * k`
            hyps[-1] = f"{hyps[-1]}, {seg}"
        else:
            hyps.append(seg)
    return hyps + [f"{TURNSTILE} {pieces[1].strip()}"]


def _parse_goal(lines: list[tuple[int, str]]) -> Goal:
    case_label = None
    if lines and lines[0][1].strip().startswith("case ") and TURNSTILE not in lines[0][1]:
        case_label = normalize_ws(lines[0][1].strip()[5:])
        lines = lines[1:]

    expanded: list[tuple[int, str, bool]] = []
    for lineno, raw in lines:
        stripped = raw.strip()
        indented = raw[:1].isspace()
        if TURNSTILE in stripped and not stripped.startswith(TURNSTILE) and not indented:
            expanded.extend((lineno, part, False) for part in _split_inline_goal(stripped))
        else:
            expanded.append((lineno, stripped, indented))

    hyps: list[list[str]] = []
    target: list[str] | None = None
    first_line = expanded[0][0] if expanded else 1
    for lineno, text, indented in expanded:
        if text.startswith(TURNSTILE):
            if target is not None:
                raise MalformedState(lineno, "goal has two '⊢' lines")
            target = [text[len(TURNSTILE):].strip()]
            continue
        if target is not None:
            target.append(text)
            continue
        head = None if indented else split_head(text)
        if head is not None:
            hyps.append(list(head))
        elif hyps:
            hyps[-1][1] = f"{hyps[-1][1]} {text}"
        else:
            raise MalformedState(lineno, f"cannot split hypothesis head in {text!r}")
    if target is None:
        raise MalformedState(first_line, "goal lacks a '⊢' line")
    target_text = normalize_ws(" ".join(target))
    if not target_text:
        raise MalformedState(first_line, "goal target is empty")
    return Goal(
        tuple(Hypothesis(normalize_ws(n), normalize_ws(s)) for n, s in hyps),
        target_text,
        case_label,
    )


def parse_state(text: str) -> ProofState:
    """Parse infoview text into a :class:`ProofState`.

    Raises :class:`MalformedState` for anything that is not a well-formed
    state; it never raises other exception types.
    """
    if not isinstance(text, str):
        raise MalformedState(1, "state text must be a string")
    if is_terminal_text(text):
        return TERMINAL
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            if current:
                blocks.append(current)
                current = []
            continue
        if _GOAL_COUNT.match(raw.strip()) and not current:
            continue
        current.append((lineno, raw.rstrip()))
    if current:
        blocks.append(current)
    if not blocks:
        raise MalformedState(1, "empty state text")
    try:
        return ProofState(tuple(_parse_goal(b) for b in blocks))
    except ValueError as exc:
        raise MalformedState(blocks[0][0][0], str(exc)) from exc


def render_goal(goal: Goal) -> str:
    lines = []
    if goal.case_label:
        lines.append(f"case {normalize_ws(goal.case_label)}")
    lines.extend(h.render() for h in goal.hypotheses)
    lines.append(f"{TURNSTILE} {normalize_ws(goal.target)}")
    return "\n".join(lines)


def render_state(state: ProofState) -> str:
    if state.is_terminal:
        return TERMINAL_TEXT
    return "\n\n".join(render_goal(g) for g in state.goals)


def _goal_key(goal: Goal):
    return (
        tuple((normalize_ws(h.name), normalize_ws(h.statement)) for h in goal.hypotheses),
        normalize_ws(goal.target),
    )


def states_equal(a: ProofState, b: ProofState) -> bool:
    """Literal, name- and order-sensitive equality after whitespace normalization.

    Case labels are not compared: they are navigation hints, not content.
    """
    if len(a.goals) != len(b.goals):
        return False
    return all(_goal_key(x) == _goal_key(y) for x, y in zip(a.goals, b.goals))
