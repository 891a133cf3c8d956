"""Clients for the text generator and the proof checker."""

from .cassette import Cassette, CassetteEntry, request_key
from .checker import (
    Checker,
    CheckRequest,
    CheckResponse,
    ErrorKind,
    MockChecker,
    SubprocessChecker,
    SuggestResponse,
    TracingChecker,
    classify_error,
    statement_to_state,
)
from .generator import (
    GenRequest,
    Generator,
    LiveGenerator,
    RecordingGenerator,
    ReplayGenerator,
    ScriptedGenerator,
    extract_tactics,
)
from .templates import TemplateId, render

__all__ = [
    "Cassette",
    "CassetteEntry",
    "CheckRequest",
    "CheckResponse",
    "Checker",
    "ErrorKind",
    "GenRequest",
    "Generator",
    "LiveGenerator",
    "MockChecker",
    "RecordingGenerator",
    "ReplayGenerator",
    "ScriptedGenerator",
    "SubprocessChecker",
    "SuggestResponse",
    "TemplateId",
    "TracingChecker",
    "classify_error",
    "extract_tactics",
    "render",
    "request_key",
    "statement_to_state",
]
