"""Proof-checker clients.

Wire protocol (newline-delimited JSON over stdio, one response per request,
in order)::

    -> {"cmd": "apply", "statement": ..., "prefix": [...], "tactics": [...]}
    <- {"ok": true, "state": "<infoview text>"}
    <- {"ok": false, "kind": "syntax" | "semantic" | "timeout", "message": ...}

    -> {"cmd": "suggest", "statement": ..., "prefix": [...]}
    <- {"ok": true, "suggestions": ["<tactic>", ...], "state": "<state after prefix>"}

``state`` in a suggest response is optional; the search uses it to notice
that the prefix already closed the goal.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..errors import MalformedState, ProtocolError, SuggestUnsupported
from ..state import Goal, Hypothesis, ProofState, normalize_ws, parse_state, render_state, split_head, split_top_level
from ..transform import statement_header

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0


class ErrorKind(str, Enum):
    SYNTAX = "syntax"
    SEMANTIC = "semantic"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class CheckRequest:
    statement: str
    prefix_tactics: tuple[str, ...] = ()
    new_tactics: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "prefix_tactics", tuple(self.prefix_tactics))
        object.__setattr__(self, "new_tactics", tuple(self.new_tactics))

    @property
    def all_tactics(self) -> tuple[str, ...]:
        return self.prefix_tactics + self.new_tactics

    def to_wire(self) -> dict:
        return {
            "cmd": "apply",
            "statement": self.statement,
            "prefix": list(self.prefix_tactics),
            "tactics": list(self.new_tactics),
        }


@dataclass(frozen=True)
class CheckResponse:
    ok: bool
    state: ProofState | None = None
    error_kind: ErrorKind | None = None
    message: str = ""

    def __post_init__(self):
        if self.ok and self.state is None:
            raise ValueError("ok response needs a state")
        if not self.ok and self.error_kind is None:
            raise ValueError("failed response needs an error kind")

    @classmethod
    def success(cls, state: ProofState) -> CheckResponse:
        return cls(True, state)

    @classmethod
    def failure(cls, kind: ErrorKind | str, message: str) -> CheckResponse:
        return cls(False, None, ErrorKind(kind), message)

    def to_wire(self) -> dict:
        if self.ok:
            return {"ok": True, "state": render_state(self.state)}
        return {"ok": False, "kind": self.error_kind.value, "message": self.message}


@dataclass(frozen=True)
class SuggestResponse:
    suggestions: tuple[str, ...] = ()
    state: ProofState | None = None


@lru_cache(maxsize=None)
def _patterns(path: str | None) -> tuple[str, ...]:
    if path:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    else:
        data = json.loads(resources.files(__package__).joinpath("error_patterns.json").read_text(encoding="utf-8"))
    return tuple(p.lower() for p in data["syntax"])


def classify_error(diagnostic: str) -> ErrorKind:
    """``syntax`` iff the diagnostic matches a syntax pattern, else ``semantic``.

    The pattern list is ``error_patterns.json``; ``COSPROVER_ERROR_PATTERNS``
    points at a replacement file.
    """
    text = (diagnostic or "").lower()
    if any(p in text for p in _patterns(os.environ.get("COSPROVER_ERROR_PATTERNS"))):
        return ErrorKind.SYNTAX
    return ErrorKind.SEMANTIC


def response_from_wire(obj: dict) -> CheckResponse:
    if not isinstance(obj, dict) or "ok" not in obj:
        raise ProtocolError(f"bad checker response: {obj!r}")
    if obj["ok"]:
        if "state" not in obj:
            raise ProtocolError("ok response without state")
        try:
            return CheckResponse.success(parse_state(obj["state"]))
        except MalformedState as exc:
            raise ProtocolError(f"checker returned an unparseable state: {exc}") from exc
    message = str(obj.get("message", ""))
    kind = obj.get("kind") or classify_error(message).value
    if kind not in {k.value for k in ErrorKind}:
        kind = classify_error(message).value
    return CheckResponse.failure(kind, message)


class Checker:
    def check(self, req: CheckRequest) -> CheckResponse:
        raise NotImplementedError

    def suggest(self, statement: str, prefix: tuple[str, ...] | list[str]) -> SuggestResponse:
        raise SuggestUnsupported(f"{type(self).__name__} does not implement suggest")

    def close(self) -> None:
        pass


class TracingChecker(Checker):
    """Wrap a checker and record every call as ``(cmd, tactics)``."""

    def __init__(self, inner: Checker):
        self.inner = inner
        self.calls: list[tuple[str, tuple[str, ...]]] = []

    def check(self, req: CheckRequest) -> CheckResponse:
        self.calls.append(("apply", req.all_tactics))
        return self.inner.check(req)

    def suggest(self, statement, prefix):
        self.calls.append(("suggest", tuple(prefix)))
        return self.inner.suggest(statement, prefix)

    def close(self) -> None:
        self.inner.close()


_DECL = ("theorem", "lemma", "example")


def statement_to_state(statement: str) -> ProofState:
    """Initial state of a theorem header, as the mock's elaboration echo.

    Binders become hypotheses in order; instance binders ``[C α]`` get the
    name ``inst✝``.
    """
    text = normalize_ws(statement_header(statement))
    words = text.split(" ", 2)
    if not words or words[0] not in _DECL:
        raise MalformedState(1, "statement does not start with theorem/lemma/example")
    rest = " ".join(words[1:]) if words[0] == "example" else (words[2] if len(words) > 2 else "")
    hyps: list[Hypothesis] = []
    pos = 0
    while pos < len(rest) and rest[pos] in "([{⦃":
        close = {"(": ")", "[": "]", "{": "}", "⦃": "⦄"}[rest[pos]]
        depth, end = 0, None
        for i in range(pos, len(rest)):
            if rest[i] in "([{⦃⟨":
                depth += 1
            elif rest[i] in ")]}⦄⟩":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        if end is None or rest[end] != close:
            raise MalformedState(1, "unbalanced binder in statement")
        inner = rest[pos + 1 : end].strip()
        head = split_head(inner)
        if head is not None:
            hyps.append(Hypothesis(*head))
        elif rest[pos] == "[":
            hyps.append(Hypothesis("inst✝", inner))
        else:
            raise MalformedState(1, f"cannot read binder {inner!r}")
        pos = end + 1
        while pos < len(rest) and rest[pos] == " ":
            pos += 1
    if not rest[pos:].startswith(":"):
        raise MalformedState(1, "statement has no ':' before its target")
    target = split_top_level(rest[pos + 1 :], ":=")[0].strip()
    if not target:
        raise MalformedState(1, "statement has an empty target")
    return ProofState((Goal(tuple(hyps), target),))


def statement_fingerprint(statement: str) -> str:
    return hashlib.sha256(normalize_ws(statement_header(statement)).encode("utf-8")).hexdigest()[:16]


def _tactic_key(tactics) -> tuple[str, ...]:
    return tuple(normalize_ws(t) for t in tactics)


@dataclass
class MockChecker(Checker):
    """Closed-world scripted checker.

    Responses come from a scenario table keyed by (statement fingerprint,
    full tactic list). Unknown requests fail as ``semantic`` with
    ``no scenario rule``, except that a zero-tactic request echoes the
    statement's initial state. A rule with statement ``"*"`` matches any
    statement.
    """

    rules: dict[tuple[str, tuple[str, ...]], CheckResponse] = field(default_factory=dict)
    suggestions: dict[tuple[str, tuple[str, ...]], SuggestResponse] = field(default_factory=dict)
    supports_suggest: bool = True

    @classmethod
    def from_scenario(cls, scenario: dict) -> MockChecker:
        mock = cls(supports_suggest=scenario.get("supports_suggest", True))
        for rule in scenario.get("rules", []):
            mock.add_rule(rule)
        return mock

    @classmethod
    def load(cls, path: str | Path) -> MockChecker:
        return cls.from_scenario(json.loads(Path(path).read_text(encoding="utf-8")))

    def add_rule(self, rule: dict) -> None:
        stmt = rule["statement"]
        fp = "*" if stmt == "*" else statement_fingerprint(stmt)
        if rule.get("suggest"):
            state = parse_state(rule["state"]) if rule.get("state") else None
            self.suggestions[(fp, _tactic_key(rule.get("prefix", [])))] = SuggestResponse(
                tuple(rule.get("suggestions", [])), state
            )
            return
        key = (fp, _tactic_key(rule.get("tactics", [])))
        if rule.get("ok", True):
            self.rules[key] = CheckResponse.success(parse_state(rule["state"]))
        else:
            message = rule.get("message", "")
            self.rules[key] = CheckResponse.failure(rule.get("kind") or classify_error(message), message)

    def on(self, statement: str, tactics, state: str | None = None, *, kind: str | None = None, message: str = ""):
        """Shorthand for scripting one apply rule in tests."""
        rule = {"statement": statement, "tactics": list(tactics)}
        if state is not None:
            rule["state"] = state
        else:
            rule.update(ok=False, kind=kind, message=message)
        self.add_rule(rule)
        return self

    def on_suggest(self, statement: str, prefix, suggestions, state: str | None = None):
        self.add_rule(
            {"statement": statement, "suggest": True, "prefix": list(prefix), "suggestions": list(suggestions), "state": state}
        )
        return self

    def check(self, req: CheckRequest) -> CheckResponse:
        tactics = _tactic_key(req.all_tactics)
        for fp in (statement_fingerprint(req.statement), "*"):
            hit = self.rules.get((fp, tactics))
            if hit is not None:
                return hit
        if not tactics:
            try:
                return CheckResponse.success(statement_to_state(req.statement))
            except (MalformedState, ValueError) as exc:
                return CheckResponse.failure(ErrorKind.SYNTAX, f"cannot elaborate statement: {exc}")
        return CheckResponse.failure(ErrorKind.SEMANTIC, "no scenario rule")

    def suggest(self, statement, prefix) -> SuggestResponse:
        if not self.supports_suggest:
            raise SuggestUnsupported("scenario disables suggest")
        key = _tactic_key(prefix)
        for fp in (statement_fingerprint(statement), "*"):
            hit = self.suggestions.get((fp, key))
            if hit is not None:
                return hit
        return SuggestResponse()


class SubprocessChecker(Checker):
    """Client for an external checker speaking the JSON-lines protocol."""

    def __init__(self, cmd: str | list[str] | None = None, timeout: float = DEFAULT_TIMEOUT):
        cmd = cmd or os.environ.get("COSPROVER_CHECKER_CMD")
        if not cmd:
            raise ProtocolError("no checker command (set --checker-cmd or COSPROVER_CHECKER_CMD)")
        self.cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def _start(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._lines = queue.Queue()
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
            threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()
        return self._proc

    @staticmethod
    def _pump(proc: subprocess.Popen, out: queue.Queue) -> None:
        for line in proc.stdout:
            out.put(line)
        out.put(None)

    def _kill(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def _roundtrip(self, payload: dict) -> dict | None:
        """Send one request; ``None`` means the call timed out."""
        with self._lock:
            proc = self._start()
            try:
                proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self._kill()
                raise ProtocolError(f"checker process unavailable: {exc}") from exc
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                # the session is in an unknown state after a timeout
                self._kill()
                return None
            if line is None:
                self._kill()
                raise ProtocolError("checker process exited")
            try:
                return json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"non-JSON checker output: {line!r}") from exc

    def check(self, req: CheckRequest) -> CheckResponse:
        obj = self._roundtrip(req.to_wire())
        if obj is None:
            return CheckResponse.failure(ErrorKind.TIMEOUT, f"check timed out after {self.timeout}s")
        return response_from_wire(obj)

    def suggest(self, statement, prefix) -> SuggestResponse:
        obj = self._roundtrip({"cmd": "suggest", "statement": statement, "prefix": list(prefix)})
        if obj is None:
            return SuggestResponse()
        if not obj.get("ok"):
            if obj.get("kind") == "unsupported" or "unknown cmd" in str(obj.get("message", "")):
                raise SuggestUnsupported(str(obj.get("message", "")))
            return SuggestResponse()
        state = None
        if obj.get("state"):
            try:
                state = parse_state(obj["state"])
            except MalformedState as exc:
                raise ProtocolError(f"unparseable suggest state: {exc}") from exc
        return SuggestResponse(tuple(obj.get("suggestions", [])), state)

    def close(self) -> None:
        with self._lock:
            if self._proc is not None:
                try:
                    self._proc.stdin.close()
                    self._proc.wait(timeout=5)
                except (OSError, subprocess.TimeoutExpired):
                    self._proc.kill()
                self._proc = None
