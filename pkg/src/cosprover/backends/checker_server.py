"""Serve a mock scenario over the stdio checker protocol.

    python -m cosprover.backends.checker_server --scenario scenario.json

Useful as a reference peer for the JSON-lines protocol and for exercising
``SubprocessChecker`` without a Lean installation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from ..state import render_state
from .checker import CheckRequest, MockChecker


def serve(mock: MockChecker, stdin=None, stdout=None, delay: float = 0.0) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            reply = {"ok": False, "kind": "syntax", "message": f"bad request: {exc}"}
        else:
            if delay:
                time.sleep(delay)
            cmd = req.get("cmd")
            if cmd == "apply":
                reply = mock.check(
                    CheckRequest(req["statement"], tuple(req.get("prefix", [])), tuple(req.get("tactics", [])))
                ).to_wire()
            elif cmd == "suggest" and mock.supports_suggest:
                res = mock.suggest(req["statement"], req.get("prefix", []))
                reply = {"ok": True, "suggestions": list(res.suggestions)}
                if res.state is not None:
                    reply["state"] = render_state(res.state)
            else:
                reply = {"ok": False, "kind": "unsupported", "message": f"unknown cmd {cmd!r}"}
        stdout.write(json.dumps(reply, ensure_ascii=False) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--delay", type=float, default=0.0, help="seconds to sleep before each reply")
    args = parser.parse_args(argv)
    serve(MockChecker.load(args.scenario), delay=args.delay)
    return 0


if __name__ == "__main__":
    sys.exit(main())
