"""Record/replay storage for generator responses.

Entries are keyed by a SHA-256 over the canonical request (template id,
sorted slots with whitespace-normalized values, temperature). Repeated
requests with the same key are told apart by ``sequence_index``; a
``scope`` (the problem id) keeps concurrent problems from interleaving.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from ..errors import CassetteMiss
from ..state import normalize_ws


def request_key(template_id: str, slots: dict[str, str], temperature: float) -> str:
    canonical = json.dumps(
        {
            "template_id": str(template_id),
            "slots": {k: normalize_ws(str(v)) for k, v in sorted(slots.items())},
            "temperature": round(float(temperature), 6),
        },
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CassetteEntry:
    key: str
    response_text: str
    sequence_index: int
    template_id: str = ""
    scope: str = ""

    def to_json(self) -> dict:
        return {
            "scope": self.scope,
            "key": self.key,
            "sequence_index": self.sequence_index,
            "template_id": self.template_id,
            "response_text": self.response_text,
        }


class Cassette:
    def __init__(self, entries: list[CassetteEntry] | None = None):
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], dict[int, CassetteEntry]] = defaultdict(dict)
        self._cursor: dict[tuple[str, str], int] = defaultdict(int)
        for e in entries or ():
            self._insert(e)

    def _insert(self, entry: CassetteEntry) -> None:
        slot = self._entries[(entry.scope, entry.key)]
        if entry.sequence_index in slot:
            raise ValueError(f"duplicate cassette entry {entry.key}#{entry.sequence_index} scope={entry.scope!r}")
        slot[entry.sequence_index] = entry

    @classmethod
    def load(cls, path: str | Path) -> Cassette:
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    entries.append(
                        CassetteEntry(
                            key=obj["key"],
                            response_text=obj["response_text"],
                            sequence_index=int(obj["sequence_index"]),
                            template_id=obj.get("template_id", ""),
                            scope=obj.get("scope", ""),
                        )
                    )
        return cls(entries)

    def entries(self) -> list[CassetteEntry]:
        with self._lock:
            out = [e for slot in self._entries.values() for e in slot.values()]
        return sorted(out, key=lambda e: (e.scope, e.key, e.sequence_index))

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries():
                fh.write(json.dumps(e.to_json(), ensure_ascii=False, sort_keys=True) + "\n")

    def append(self, scope: str, key: str, template_id: str, response_text: str) -> CassetteEntry:
        with self._lock:
            slot = self._entries[(scope, key)]
            entry = CassetteEntry(key, response_text, len(slot), template_id, scope)
            slot[entry.sequence_index] = entry
            return entry

    def next(self, scope: str, key: str, template_id: str = "") -> str:
        """Return the next unconsumed response for ``key`` within ``scope``.

        Entries recorded without a scope serve every scope.
        """
        with self._lock:
            for s in (scope, ""):
                slot = self._entries.get((s, key))
                if not slot:
                    continue
                idx = self._cursor[(scope, key)]
                if idx in slot:
                    self._cursor[(scope, key)] = idx + 1
                    return slot[idx].response_text
                break
        raise CassetteMiss(key, template_id, scope)

    def reset(self) -> None:
        with self._lock:
            self._cursor.clear()

    def __len__(self) -> int:
        return sum(len(slot) for slot in self._entries.values())
