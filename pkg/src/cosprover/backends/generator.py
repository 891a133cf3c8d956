"""Text-generation clients: live HTTP, cassette replay/record, and scripted stubs."""

from __future__ import annotations

import logging
import os
import re
import textwrap
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Union

from ..errors import BackendUnavailable, NoCodeBlock, TokenBudgetExceeded
from ..transform import Origin, TacticBlock
from .cassette import Cassette, request_key
from .templates import TemplateId, render

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_TOKENS = 8192


@dataclass(frozen=True)
class GenRequest:
    template_id: TemplateId
    slots: dict[str, str]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    scope: str = ""

    def __post_init__(self):
        object.__setattr__(self, "template_id", TemplateId(self.template_id))
        object.__setattr__(self, "slots", {k: str(v) for k, v in self.slots.items()})

    @property
    def key(self) -> str:
        return request_key(self.template_id.value, self.slots, self.temperature)

    def prompt(self) -> str:
        return render(self.template_id, self.slots)


class Generator:
    """Base class; subclasses implement :meth:`generate`."""

    def generate(self, req: GenRequest) -> str:
        raise NotImplementedError

    def close(self) -> None:
        pass


class ReplayGenerator(Generator):
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def generate(self, req: GenRequest) -> str:
        req.prompt()  # validates slots even though the text is never sent
        return self.cassette.next(req.scope, req.key, req.template_id.value)


class RecordingGenerator(Generator):
    """Forward to ``inner`` and append every response to ``cassette``."""

    def __init__(self, inner: Generator, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def generate(self, req: GenRequest) -> str:
        text = self.inner.generate(req)
        self.cassette.append(req.scope, req.key, req.template_id.value, text)
        return text

    def close(self) -> None:
        self.inner.close()


class LiveGenerator(Generator):
    """OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        api_key: str | None = None,
        base_url: str | None = None,
        model: str | None = None,
        timeout: float = 600.0,
        retries: int = 2,
        transport=None,
    ):
        import httpx

        self.api_key = api_key or os.environ.get("COSPROVER_API_KEY")
        if not self.api_key:
            raise BackendUnavailable("live backend needs COSPROVER_API_KEY")
        self.base_url = (base_url or os.environ.get("COSPROVER_API_BASE") or "https://api.deepseek.com").rstrip("/")
        self.model = model or os.environ.get("COSPROVER_MODEL") or "deepseek-reasoner"
        self.retries = retries
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def generate(self, req: GenRequest) -> str:
        import httpx

        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt()}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(f"{self.base_url}/chat/completions", json=payload, headers=headers)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise BackendUnavailable(f"HTTP {resp.status_code}")
                resp.raise_for_status()
                choice = resp.json()["choices"][0]
                if choice.get("finish_reason") == "length":
                    raise TokenBudgetExceeded(f"response truncated at max_tokens={req.max_tokens}")
                return choice["message"]["content"] or ""
            except TokenBudgetExceeded:
                raise
            except (httpx.HTTPError, BackendUnavailable, KeyError, ValueError) as exc:
                last_error = exc
                log.warning("generate attempt %d failed: %s", attempt + 1, exc)
                if attempt < self.retries:
                    time.sleep(2**attempt)
        raise BackendUnavailable(str(last_error))

    def close(self) -> None:
        self._client.close()


Response = Union[str, Callable[[GenRequest], str]]


@dataclass
class ScriptedGenerator(Generator):
    """Deterministic stub: per-template response queues, then ``default``.

    A response may be a string or a callable receiving the request. Raising
    from a callable simulates backend failure.
    """

    script: dict[str, list[Response]] = field(default_factory=dict)
    default: Response | None = None
    calls: list[GenRequest] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._queues = {TemplateId(k).value: list(v) for k, v in self.script.items()}

    def generate(self, req: GenRequest) -> str:
        req.prompt()
        with self._lock:
            self.calls.append(req)
            queue = self._queues.get(req.template_id.value)
            response = queue.pop(0) if queue else self.default
        if response is None:
            raise BackendUnavailable(f"no scripted response for {req.template_id.value}")
        return response(req) if callable(response) else response

    def count(self, template_id: str | TemplateId) -> int:
        tid = TemplateId(template_id)
        return sum(1 for c in self.calls if c.template_id is tid)


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_THINK = re.compile(r"<think>.*?</think>", re.DOTALL)
_META = re.compile(r"^(previous failed attempt|error|issue|analysis|improved tactic solution)\s*:", re.IGNORECASE)


def _strip_comment(line: str) -> str:
    in_str = False
    depth = 0
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif not in_str:
            if ch in "([{⟨":
                depth += 1
            elif ch in ")]}⟩":
                depth = max(depth - 1, 0)
            elif depth == 0 and line.startswith("--", i):
                return line[:i].rstrip()
    return line.rstrip()


def _split_semicolons(line: str) -> list[str]:
    parts, start, depth, in_str = [], 0, 0, False
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif in_str:
            continue
        elif ch in "([{⟨":
            depth += 1
        elif ch in ")]}⟩":
            depth = max(depth - 1, 0)
        elif ch == ";" and depth == 0:
            if line[i - 1 : i] == "<" and line[i + 1 : i + 2] == ">":
                continue
            parts.append(line[start:i])
            start = i + 1
    parts.append(line[start:])
    return [p.strip() for p in parts if p.strip()]


def extract_tactics(model_output: str, origin: Origin = Origin.LLM) -> TacticBlock:
    """Tactics from the last fenced code block of a model response.

    Drops the language tag, blank lines, comment-only lines and trailing
    ``--`` comments; splits top-level ``;`` separators (``<;>`` is kept)
    while preserving each line's relative indentation.
    """
    text = _THINK.sub("", model_output)
    blocks = _FENCE.findall(text)
    if not blocks:
        raise NoCodeBlock("model output has no fenced code block")
    body = textwrap.dedent(blocks[-1])
    lines: list[str] = []
    for raw in body.splitlines():
        stripped = raw.strip()
        if not stripped or stripped.startswith("--") or _META.match(stripped):
            continue
        code = _strip_comment(raw)
        if not code.strip():
            continue
        indent = code[: len(code) - len(code.lstrip())]
        lines.extend(indent + piece for piece in _split_semicolons(code))
    if not lines:
        raise NoCodeBlock("fenced code block holds no tactics")
    return TacticBlock(tuple(lines), origin)
