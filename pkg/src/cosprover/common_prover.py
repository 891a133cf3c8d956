"""Deterministic automation tried before any model call.

A fixed list of single tactics is checked in order, then an iterative
``apply?`` search asks the checker for suggestions and follows the top one
until the goal closes or the round budget runs out.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from .backends.checker import Checker, CheckRequest, ErrorKind
from .errors import SuggestUnsupported
from .state import TERMINAL, ProofState, states_equal
from .transform import Origin, TacticBlock

log = logging.getLogger(__name__)

DEFAULT_SINGLES = ("nlinarith", "linarith", "aesop", "omega", "field_simp", "ring", "simp", "norm_num")


@dataclass(frozen=True)
class TacticSchedule:
    singles: tuple[str, ...] = DEFAULT_SINGLES
    apply_rounds: int = 6
    breadth: int = 1

    def __post_init__(self):
        object.__setattr__(self, "singles", tuple(self.singles))
        if self.apply_rounds < 0 or self.breadth < 1:
            raise ValueError("apply_rounds must be >= 0 and breadth >= 1")

    @property
    def max_calls(self) -> int:
        return len(self.singles) + self.apply_rounds


def try_schedule(
    prev: ProofState,
    target: ProofState,
    statement: str,
    prefix: tuple[str, ...] | list[str],
    checker: Checker,
    schedule: TacticSchedule = TacticSchedule(),
    accept: Callable[[ProofState], bool] | None = None,
) -> TacticBlock | None:
    """First schedule tactic whose reached state is accepted, else ``None``.

    ``accept`` defaults to equality with ``target``; the orchestrator widens
    it to later chain states. The ``apply?`` search only runs when the
    terminal state would be accepted.
    """
    if prev.is_terminal:
        raise ValueError("common prover needs a non-terminal previous state")
    if states_equal(prev, target):
        return None
    if accept is None:
        accept = lambda s: states_equal(s, target)  # noqa: E731
    prefix = tuple(prefix)
    for tactic in schedule.singles:
        resp = checker.check(CheckRequest(statement, prefix, (tactic,)))
        if resp.ok and accept(resp.state):
            return TacticBlock((tactic,), Origin.COMMON_PROVER, reached=resp.state)
        if not resp.ok and resp.error_kind is ErrorKind.TIMEOUT:
            log.info("common prover: %s timed out, skipping", tactic)
    if schedule.apply_rounds and accept(TERMINAL):
        try:
            return try_apply_search(prev, statement, prefix, checker, schedule.apply_rounds, schedule.breadth)
        except SuggestUnsupported as exc:
            log.info("apply? search unavailable: %s", exc)
    return None


def try_apply_search(
    prev: ProofState,
    statement: str,
    prefix: tuple[str, ...] | list[str],
    checker: Checker,
    rounds: int = 6,
    breadth: int = 1,
    trail: list[ProofState] | None = None,
) -> TacticBlock | None:
    """Follow ``apply?`` suggestions for at most ``rounds`` suggest calls.

    Returns the accumulated suggestions once the checker reports the goal
    closed. Intermediate states are appended to ``trail`` when given.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if prev.is_terminal:
        raise ValueError("apply? search needs a non-terminal state")
    prefix = tuple(prefix)
    budget = rounds

    def search(acc: tuple[str, ...]) -> tuple[str, ...] | None:
        nonlocal budget
        if budget <= 0:
            return None
        budget -= 1
        res = checker.suggest(statement, prefix + acc)
        if res.state is not None:
            if acc and res.state.is_terminal:
                return acc
            if trail is not None and acc:
                trail.append(res.state)
        for tactic in res.suggestions[:breadth]:
            found = search(acc + (tactic,))
            if found is not None:
                return found
        return None

    found = search(())
    if found is None:
        return None
    return TacticBlock(found, Origin.COMMON_PROVER, reached=TERMINAL)
