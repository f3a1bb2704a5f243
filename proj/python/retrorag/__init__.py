"""Retroactive retrieval-augmented question answering (C++ core)."""

import json as _json

from ._core import (  # noqa: F401
    ChatCompletionsClient,
    CorpusIndex,
    Document,
    LlmClient,
    Passage,
    Pipeline,
    RetroragError,
    RunConfig,
    ScriptedClient,
    chunk_document,
    exact_match,
    normalize_answer,
    token_f1,
    tokenize,
    yes_no_share,
)


def parse_trace(jsonl):
    """Trace text (JSON lines) -> list of event dicts."""
    return [_json.loads(line) for line in jsonl.splitlines() if line.strip()]
