"""Training-pair extraction from elaboration-tree dumps.

Tree files are JSON documents::

    {"schema_version": 1, "theorem_name": ..., "statement": ...,
     "root": {"kind": "tactic" | "term_app" | "by_block" | "other",
              "span": {"start": int, "end": int}, "expr": str,
              "expected_type": str | null,
              "goals_before": [goal text, ...], "goals_after": [...],
              "gamma": str, "sigma": str, "delta": str, "ctx": str, "res": str,
              "children": [node, ...]}}

Each entry of ``goals_before``/``goals_after`` is one goal in infoview
form; an empty list is the terminal state.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, NamedTuple

from .chain import ChainOfStates, ChainSource, length_filter, state_to_statement
from .errors import InconsistentChain, MalformedState, MissingExpectedType, SchemaViolation
from .state import TERMINAL, Hypothesis, ProofState, normalize_ws, parse_state, render_state, states_equal
from .transform import Origin, TacticBlock

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_SUBSCRIPTS = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


class NodeKind(str, Enum):
    TACTIC = "tactic"
    TERM_APP = "term_app"
    BY_BLOCK = "by_block"
    OTHER = "other"


@dataclass(frozen=True)
class ElabNode:
    kind: NodeKind
    start: int
    end: int
    expr: str = ""
    expected_type: str | None = None
    goals_before: tuple[str, ...] = ()
    goals_after: tuple[str, ...] = ()
    # carried verbatim, never interpreted
    gamma: str = ""
    sigma: str = ""
    delta: str = ""
    ctx: str = ""
    res: str = ""
    children: tuple[ElabNode, ...] = ()

    def walk(self) -> Iterator[ElabNode]:
        yield self
        for child in self.children:
            yield from child.walk()

    @property
    def state_before(self) -> ProofState:
        return _goals_to_state(self.goals_before)

    @property
    def state_after(self) -> ProofState:
        return _goals_to_state(self.goals_after)


@dataclass(frozen=True)
class ElabTree:
    theorem_name: str
    statement: str
    root: ElabNode
    path: str = ""


def _goals_to_state(goals: tuple[str, ...]) -> ProofState:
    if not goals:
        return TERMINAL
    return parse_state("\n\n".join(goals))


class _Reader:
    def __init__(self, path):
        self.path = path
        self.index = -1

    def fail(self, reason: str):
        raise SchemaViolation(self.path, self.index, reason)

    def node(self, obj, parent_span: tuple[int, int] | None) -> ElabNode:
        self.index += 1
        if not isinstance(obj, dict):
            self.fail("node must be an object")
        try:
            kind = NodeKind(obj.get("kind"))
        except ValueError:
            self.fail(f"unknown kind {obj.get('kind')!r}")
        span = obj.get("span")
        if not isinstance(span, dict) or not all(isinstance(span.get(k), int) for k in ("start", "end")):
            self.fail("span needs integer start and end")
        start, end = span["start"], span["end"]
        if start > end:
            self.fail(f"span start {start} > end {end}")
        if parent_span is not None and not (parent_span[0] <= start and end <= parent_span[1]):
            self.fail(f"span [{start}, {end}] outside parent [{parent_span[0]}, {parent_span[1]}]")
        goals = {}
        for key in ("goals_before", "goals_after"):
            value = obj.get(key, [])
            if not isinstance(value, list) or not all(isinstance(g, str) for g in value):
                self.fail(f"{key} must be a list of strings")
            goals[key] = tuple(value)
        expected = obj.get("expected_type")
        if expected is not None and not isinstance(expected, str):
            self.fail("expected_type must be a string or null")
        children = obj.get("children", [])
        if not isinstance(children, list):
            self.fail("children must be a list")
        me = self.index
        kids = tuple(self.node(c, (start, end)) for c in children)
        self.index = max(self.index, me)
        return ElabNode(
            kind,
            start,
            end,
            str(obj.get("expr", "")),
            expected,
            goals["goals_before"],
            goals["goals_after"],
            *(str(obj.get(k, "")) for k in ("gamma", "sigma", "delta", "ctx", "res")),
            kids,
        )


def read_tree(path: str | Path) -> ElabTree:
    """Load and validate a tree file, keeping its theorem metadata."""
    path = Path(path)
    reader = _Reader(str(path))
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(str(path), -1, f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        reader.fail("top level must be an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        reader.fail(f"unsupported schema_version {doc.get('schema_version')!r}")
    if "root" not in doc:
        reader.fail("missing root")
    root = reader.node(doc["root"], None)
    return ElabTree(str(doc.get("theorem_name", path.stem)), str(doc.get("statement", "")), root, str(path))


def load_tree(path: str | Path) -> ElabNode:
    return read_tree(path).root


def _tactic_lines(node: ElabNode) -> tuple[str, ...]:
    lines = [line.rstrip() for line in node.expr.splitlines() if line.strip()]
    if not lines:
        raise InconsistentChain(f"tactic node at {node.start} has no text")
    indent = min(len(line) - len(line.lstrip()) for line in lines)
    return tuple(line[indent:] for line in lines)


def chain_of_by(node: ElabNode) -> tuple[ChainOfStates, list[TacticBlock]]:
    """The chain of a single ``by`` block from its direct tactic children.

    A tactic that leaves the state unchanged is folded into the next
    transition (or the previous one at the end) so the chain stays
    deduplicated and aligned with its blocks.
    """
    tactics = [c for c in node.children if c.kind is NodeKind.TACTIC]
    if not tactics:
        raise InconsistentChain(f"by block at {node.start} has no tactic children")
    states = [tactics[0].state_before]
    blocks: list[TacticBlock] = []
    pending: tuple[str, ...] = ()
    for prev, tac in zip([None] + tactics, tactics):
        if prev is not None and not states_equal(tac.state_before, prev.state_after):
            raise InconsistentChain(f"tactic at {tac.start} does not start where the previous one ended")
        after = tac.state_after
        lines = pending + _tactic_lines(tac)
        if states_equal(after, states[-1]):
            pending = lines
            continue
        pending = ()
        states.append(after)
        blocks.append(TacticBlock(lines, Origin.EXTRACTED, reached=after))
    if pending and blocks:
        last = blocks[-1]
        blocks[-1] = TacticBlock(last.lines + pending, Origin.EXTRACTED, reached=last.reached)
    return ChainOfStates(tuple(states), ChainSource.EXTRACTED), blocks


def _by_blocks(node: ElabNode, inside: bool = False) -> Iterator[tuple[ElabNode, bool]]:
    """Post-order ``(by_block, nested)`` pairs; nested means it has a by ancestor."""
    child_inside = inside or node.kind is NodeKind.BY_BLOCK
    for child in node.children:
        yield from _by_blocks(child, child_inside)
    if node.kind is NodeKind.BY_BLOCK:
        yield node, inside


def collect_by_chains(root: ElabNode, statement: str = "", name: str = "aux") -> list[tuple[str, ChainOfStates, list[TacticBlock]]]:
    """Chains of the outermost ``by`` blocks; nested ones stay single tactics.

    The block whose initial state is the root's uses ``statement`` when
    given; other blocks get a statement built from their initial state.
    """
    out = []
    outer = [n for n, nested in _by_blocks(root) if not nested]
    outer.sort(key=lambda n: n.start)
    for k, node in enumerate(outer):
        chain, blocks = chain_of_by(node)
        if statement and states_equal(chain.states[0], root.state_before):
            stmt = statement
        else:
            stmt = state_to_statement(chain.states[0], f"{name}_by{k}")
        out.append((stmt, chain, blocks))
    return out


class SubProof(NamedTuple):
    statement: str
    chain: ChainOfStates
    tactics: list[TacticBlock]
    node: ElabNode | None = None


def split_nested_by(root: ElabNode, name: str = "aux") -> list[SubProof]:
    """Nested ``by`` blocks as standalone sub-proofs, innermost first."""
    out = []
    for node, nested in _by_blocks(root):
        if not nested:
            continue
        chain, blocks = chain_of_by(node)
        out.append(SubProof(state_to_statement(chain.states[0], f"{name}_sub{len(out)}"), chain, blocks, node))
    return out


def _composites(node: ElabNode, context: tuple[str, ...], top: bool = True) -> Iterator[tuple[tuple[str, ...], ElabNode]]:
    """Post-order term_app nodes with the goals of their enclosing tactic."""
    if node.kind is NodeKind.BY_BLOCK and not top:
        return
    if node.kind is NodeKind.TACTIC:
        context = node.goals_before
    for child in node.children:
        yield from _composites(child, context, False)
    if node.kind is NodeKind.TERM_APP:
        yield context, node


def _fresh_name(k: int, taken: set[str]) -> tuple[str, int]:
    while True:
        name = "h" + str(k).translate(_SUBSCRIPTS)
        if name not in taken:
            return name, k
        k += 1


def enhance_with_tactics(
    source: ElabNode, base: ChainOfStates, tactics: list[TacticBlock] | None = None
) -> tuple[ChainOfStates, list[TacticBlock] | None, bool]:
    """Insert one state per composite term; see :func:`enhance_composites`.

    Returns the new chain, the realigned tactics (``have`` steps for the
    inserted transitions), and whether anything was inserted.
    """
    inserts: dict[int, list[tuple[str, str]]] = {}
    for context, term in _composites(source, source.goals_before):
        if term.expected_type is None or not term.expected_type.strip():
            log.info("%s", MissingExpectedType(f"term_app at {term.start} has no expected type; skipped"))
            continue
        try:
            containing = _goals_to_state(context)
        except MalformedState as exc:
            log.info("term_app at %d: unreadable context (%s); skipped", term.start, exc)
            continue
        if containing.is_terminal:
            continue
        if normalize_ws(term.expected_type) == normalize_ws(containing.main_goal.target):
            continue  # the whole proof term, not an intermediate fact
        index = next((i for i, s in enumerate(base.states) if states_equal(s, containing)), None)
        if index is None or index == len(base) - 1:
            log.info("term_app at %d: containing state not in chain; skipped", term.start)
            continue
        inserts.setdefault(index, []).append((normalize_ws(term.expected_type), term.expr.strip()))
    if not inserts:
        return base, tactics, False

    states: list[ProofState] = []
    blocks: list[TacticBlock] | None = [] if tactics is not None else None
    k = 0
    for i, state in enumerate(base.states):
        states.append(state)
        current = state
        for expected, expr in inserts.get(i, []):
            goal = current.main_goal
            name, k = _fresh_name(k, goal.hypothesis_names())
            k += 1
            current = ProofState((goal.with_hypothesis(Hypothesis(name, expected)),) + current.goals[1:])
            states.append(current)
            if blocks is not None:
                blocks.append(TacticBlock((f"have {name} : {expected} := {expr}",), Origin.EXTRACTED, reached=current))
        if blocks is not None and i < len(tactics):
            blocks.append(tactics[i])
    chain = ChainOfStates(tuple(states), base.source, None)
    return chain, blocks, True


def enhance_composites(source: ElabNode, base: ChainOfStates) -> ChainOfStates:
    """Make composite-term intermediate facts explicit as extra states.

    Every ``term_app`` below ``source`` (innermost first, not crossing
    nested ``by`` blocks) whose expected type is not simply the goal it
    proves yields a copy of its enclosing state with that type appended
    as a fresh ``hₖ`` hypothesis, inserted right after the enclosing
    state. Insertions for one state accumulate.
    """
    return enhance_with_tactics(source, base)[0]


def term_chain(root: ElabNode) -> tuple[ChainOfStates, list[TacticBlock]]:
    """Two-state chain of a term-mode proof, closed by ``exact``."""
    term = root.expr.strip()
    if not term:
        terms = [c for c in root.children if c.kind is not NodeKind.BY_BLOCK]
        term = terms[0].expr.strip() if terms else ""
    if not term:
        raise InconsistentChain("term proof without expression text")
    initial = root.state_before
    block = TacticBlock((f"exact {normalize_ws(term)}",), Origin.EXTRACTED, reached=TERMINAL)
    return ChainOfStates((initial, TERMINAL), ChainSource.EXTRACTED), [block]


@dataclass
class TrainingPair:
    statement: str
    chain: ChainOfStates
    tactics: list[TacticBlock]
    informal_proof: str | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.chain) != len(self.tactics) + 1:
            raise ValueError(f"{len(self.chain)} states for {len(self.tactics)} tactic blocks")

    def to_json(self) -> dict:
        return {
            "statement": self.statement,
            "chain": [render_state(s) for s in self.chain.states],
            "tactics": [list(b.lines) for b in self.tactics],
            "informal_proof": self.informal_proof,
            "provenance": self.provenance,
        }


def extract_tree(tree: ElabTree, informal: dict[str, str] | None = None, enhance: bool = True) -> list[TrainingPair]:
    """All training pairs of one tree: outer chains, then nested sub-proofs."""
    name = tree.theorem_name
    informal_proof = (informal or {}).get(name)

    def pair(statement, chain, blocks, source, role):
        enhanced = False
        if enhance:
            chain, blocks, enhanced = enhance_with_tactics(source, chain, blocks)
        prov = {"file": tree.path, "theorem_name": name, "enhanced": enhanced, "role": role}
        return TrainingPair(statement, chain, blocks, informal_proof if role == "main" else None, prov)

    root = tree.root
    pairs = []
    outer = collect_by_chains(root, tree.statement, name)
    if outer:
        by_nodes = sorted((n for n, nested in _by_blocks(root) if not nested), key=lambda n: n.start)
        for (stmt, chain, blocks), node in zip(outer, by_nodes):
            pairs.append(pair(stmt, chain, blocks, node, "main"))
    else:
        chain, blocks = term_chain(root)
        pairs.append(pair(tree.statement or state_to_statement(chain.states[0], name), chain, blocks, root, "main"))
    for sub in split_nested_by(root, name):
        pairs.append(pair(sub.statement, sub.chain, sub.tactics, sub.node, "nested"))
    return pairs


def emit_dataset(pairs: list[TrainingPair], out: str | Path) -> int:
    """Write pairs with more than two states as JSONL; returns rows written."""
    kept = length_filter([p.chain for p in pairs])
    rows = [p for p in pairs if any(p.chain is c for c in kept)]
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for p in rows:
            fh.write(json.dumps(p.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
    return len(rows)
