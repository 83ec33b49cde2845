"""Corpus reading for extraction.

The tokenization rule must match the consumer pipeline exactly
(lowercase, maximal runs of Unicode word characters excluding
underscore), otherwise stored (doc, position) keys will not align.
Records that already carry a "tokens" list are taken as-is after case
folding.
"""

from __future__ import annotations

import json
import re

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(raw_text: str) -> list[str]:
    return _TOKEN_RE.findall(raw_text.lower())


def read_corpus(path) -> list[tuple[int, list[str]]]:
    """(doc_id, tokens) pairs in id order from a corpus JSONL file."""
    docs: dict[int, list[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            doc_id = rec.get("id", len(docs))
            if doc_id in docs:
                raise ValueError(f"{path}: line {lineno}: duplicate doc id {doc_id}")
            if "tokens" in rec:
                tokens = [str(t).lower() for t in rec["tokens"]]
            elif "text" in rec:
                tokens = tokenize(rec["text"])
            else:
                raise ValueError(
                    f"{path}: line {lineno}: record has neither 'tokens' nor 'text'")
            docs[doc_id] = tokens
    return sorted(docs.items())
