"""Prompt templates stored as data files with ``{slot}`` placeholders."""

from __future__ import annotations

import re
from enum import Enum
from functools import lru_cache
from importlib import resources

from ..errors import TemplateError

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9_]*)\}")


class TemplateId(str, Enum):
    COS_GENERATE = "cos_generate"
    TACTIC_PRIMARY = "tactic_primary"
    TACTIC_ETR = "tactic_etr"
    TACTIC_ESR = "tactic_esr"
    REWRITE_LEANFRIENDLY = "rewrite_leanfriendly"
    SEMANTIC_JUDGE = "semantic_judge"


TACTIC_TEMPLATES = frozenset({TemplateId.TACTIC_PRIMARY, TemplateId.TACTIC_ETR, TemplateId.TACTIC_ESR})


@lru_cache(maxsize=None)
def load_template(template_id: TemplateId | str) -> str:
    tid = TemplateId(template_id)
    return resources.files(__package__).joinpath("templates", f"{tid.value}.txt").read_text(encoding="utf-8")


def placeholders(template_id: TemplateId | str) -> frozenset[str]:
    return frozenset(_PLACEHOLDER.findall(load_template(template_id)))


def render(template_id: TemplateId | str, slots: dict[str, str]) -> str:
    missing = placeholders(template_id) - slots.keys()
    if missing:
        raise TemplateError(f"{TemplateId(template_id).value}: missing slots {sorted(missing)}")
    return _PLACEHOLDER.sub(lambda m: slots[m.group(1)], load_template(template_id))
