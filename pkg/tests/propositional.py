"""Tiny propositional logic kit used as an independent oracle.

Formulas are tuples: ("atom", name), ("const", bool), ("not", f),
("and", f, g), ("or", f, g), ("imp", f, g).
"""

from __future__ import annotations

import itertools
import random
import re

ATOMS = ("p", "q", "r", "s", "t", "u")

_TOKEN = re.compile(r"\s*(→|∧|∨|¬|\(|\)|:|[A-Za-z_][\w₀-₉']*)")


def atoms_of(f) -> set[str]:
    if f[0] == "atom":
        return {f[1]}
    if f[0] == "const":
        return set()
    return set().union(*(atoms_of(x) for x in f[1:]))


def evaluate(f, env: dict[str, bool]) -> bool:
    tag = f[0]
    if tag == "atom":
        return env[f[1]]
    if tag == "const":
        return f[1]
    if tag == "not":
        return not evaluate(f[1], env)
    a, b = evaluate(f[1], env), evaluate(f[2], env)
    if tag == "and":
        return a and b
    if tag == "or":
        return a or b
    return (not a) or b


def tautology(f) -> bool:
    names = sorted(atoms_of(f))
    return all(evaluate(f, dict(zip(names, vals))) for vals in itertools.product((False, True), repeat=len(names)))


def conj(fs):
    if not fs:
        return ("const", True)
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = ("and", f, out)
    return out


def show(f) -> str:
    """Fully parenthesised Lean-style text."""
    tag = f[0]
    if tag == "atom":
        return f[1]
    if tag == "const":
        return "True" if f[1] else "False"
    if tag == "not":
        return f"¬({show(f[1])})"
    op = {"and": "∧", "or": "∨", "imp": "→"}[tag]
    return f"({show(f[1])} {op} {show(f[2])})"


def random_formula(rng: random.Random, atoms, depth: int = 2):
    if depth == 0 or rng.random() < 0.3:
        return ("atom", rng.choice(atoms))
    tag = rng.choice(["not", "and", "or", "imp"])
    if tag == "not":
        return ("not", random_formula(rng, atoms, depth - 1))
    return (tag, random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1))


class _Parser:
    def __init__(self, text: str):
        self.toks = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise ValueError(f"bad input at {text[pos:]!r}")
            self.toks.append(m.group(1))
            pos = m.end()
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if expected is not None and tok != expected:
            raise ValueError(f"expected {expected!r}, got {tok!r}")
        self.i += 1
        return tok

    def imp(self):
        # dependent binder `(h : P) → Q` is just `P → Q` here
        if self.peek() == "(" and self.peek(2) == ":":
            self.take("(")
            self.take()
            self.take(":")
            left = self.imp()
            self.take(")")
            self.take("→")
            return ("imp", left, self.imp())
        left = self.disj()
        if self.peek() == "→":
            self.take()
            return ("imp", left, self.imp())
        return left

    def disj(self):
        left = self.conj()
        if self.peek() == "∨":
            self.take()
            return ("or", left, self.disj())
        return left

    def conj(self):
        left = self.unary()
        if self.peek() == "∧":
            self.take()
            return ("and", left, self.conj())
        return left

    def unary(self):
        tok = self.peek()
        if tok == "¬":
            self.take()
            return ("not", self.unary())
        if tok == "(":
            self.take()
            inner = self.imp()
            self.take(")")
            return inner
        self.take()
        if tok == "True":
            return ("const", True)
        if tok == "False":
            return ("const", False)
        if tok is None or not re.match(r"[A-Za-z_]", tok):
            raise ValueError(f"unexpected token {tok!r}")
        return ("atom", tok)


def parse(text: str):
    p = _Parser(text)
    f = p.imp()
    if p.peek() is not None:
        raise ValueError(f"trailing tokens from {p.peek()!r}")
    return f


def parse_theorem(statement: str):
    """Proposition of ``theorem name : P := by sorry`` with no binders before the colon."""
    m = re.match(r"^theorem\s+\S+\s+:\s+(.*)\s+:=\s+by sorry$", statement.strip(), re.DOTALL)
    if not m:
        raise ValueError(f"not a bare theorem header: {statement!r}")
    return parse(m.group(1))


def random_pair(rng: random.Random, valid: bool):
    """Adjacent single-goal states as ``(prev_hyps, prev_target, next_hyps, next_target)``.

    Hypotheses are ``(name, formula)`` lists. With ``valid`` the next state
    only weakens what the previous one knows and strengthens its target, so
    the step is sound by construction; otherwise everything is random.
    """
    atoms = ATOMS[: rng.randint(1, len(ATOMS))]
    prev_hyps = [(f"h{chr(0x2080 + i)}", random_formula(rng, atoms)) for i in range(rng.randint(0, 3))]
    prev_target = random_formula(rng, atoms)
    new = []
    for k in range(rng.randint(0, 2)):
        if valid:
            src = rng.choice(prev_hyps)[1] if prev_hyps and rng.random() < 0.7 else ("const", True)
            f = ("or", src, random_formula(rng, atoms, 1)) if rng.random() < 0.5 else src
        else:
            f = random_formula(rng, atoms)
        new.append((f"h{chr(0x2080 + len(prev_hyps) + k)}", f))
    keep = prev_hyps if valid or rng.random() < 0.7 else [h for h in prev_hyps if rng.random() < 0.5]
    next_hyps = keep + new
    next_target = ("and", prev_target, random_formula(rng, atoms, 1)) if valid else random_formula(rng, atoms)
    return prev_hyps, prev_target, next_hyps, next_target


def step_formula(prev_hyps, prev_target, next_hyps, next_target):
    """h_p → (h_n → τ_n) → τ_p with h_p, h_n the hypothesis conjunctions."""
    hp = conj([f for _, f in prev_hyps])
    hn = conj([f for _, f in next_hyps])
    return ("imp", hp, ("imp", ("imp", hn, next_target), prev_target))


def state_text(hyps, target) -> str:
    lines = [f"{name} : {show(f)}" for name, f in hyps]
    return "\n".join(lines + [f"⊢ {show(target)}"])
