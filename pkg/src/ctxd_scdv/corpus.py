"""Corpus ingestion: tokenization, labeled documents, document-frequency weights."""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .utils import read_jsonl

log = logging.getLogger(__name__)

SPLITS = ("train", "test")

# Maximal runs of Unicode word characters, underscore excluded; everything
# else (whitespace, punctuation, symbols) separates tokens.
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(raw_text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation.

    The same rule must be applied on the embedding-extraction side so
    stored vectors align with corpus token positions.
    """
    return _TOKEN_RE.findall(raw_text.lower())


@dataclass(frozen=True)
class Document:
    id: int
    tokens: tuple[str, ...]
    label: str | None = None
    split: str = "train"


class Corpus:
    """Immutable ordered document collection with dense ids in [0, N)."""

    def __init__(self, docs: Sequence[Document]):
        docs = sorted(docs, key=lambda d: d.id)
        ids = [d.id for d in docs]
        if ids != list(range(len(docs))):
            dupes = [i for i, c in Counter(ids).items() if c > 1]
            if dupes:
                raise DataError(f"duplicate document ids: {sorted(dupes)[:5]}")
            raise DataError("document ids must be dense in [0, N)")
        for d in docs:
            if d.split not in SPLITS:
                raise DataError(f"doc {d.id}: unknown split {d.split!r}")
            if not d.tokens:
                log.warning("doc %d is empty; it will receive a zero document vector", d.id)
        self.docs: tuple[Document, ...] = tuple(docs)
        self.vocab: frozenset[str] = frozenset(t for d in docs for t in d.tokens)
        self.label_set: tuple[str, ...] = tuple(
            sorted({d.label for d in docs if d.label is not None})
        )

    @property
    def num_docs(self) -> int:
        return len(self.docs)

    def __len__(self) -> int:
        return len(self.docs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self.docs == other.docs

    def split_ids(self, split: str) -> list[int]:
        return [d.id for d in self.docs if d.split == split]

    def labels_for(self, ids: Iterable[int]) -> list[str]:
        out = []
        for i in ids:
            label = self.docs[i].label
            if label is None:
                raise DataError(f"doc {i} has no label")
            out.append(label)
        return out


def _doc_from_json(lineno: int, rec: dict, position: int, path) -> Document:
    if not isinstance(rec, dict):
        raise DataError(f"{path}: line {lineno}: record is not an object")
    if "id" in rec:
        doc_id = rec["id"]
        if not isinstance(doc_id, int) or doc_id < 0:
            raise DataError(f"{path}: line {lineno}: 'id' must be a nonnegative integer")
    else:
        doc_id = position
    if "tokens" in rec:
        toks = rec["tokens"]
        if not isinstance(toks, list) or not all(isinstance(t, str) for t in toks):
            raise DataError(f"{path}: line {lineno}: 'tokens' must be a list of strings")
        tokens = tuple(t.lower() for t in toks)
    elif "text" in rec:
        if not isinstance(rec["text"], str):
            raise DataError(f"{path}: line {lineno}: 'text' must be a string")
        tokens = tuple(tokenize(rec["text"]))
    else:
        raise DataError(f"{path}: line {lineno}: record has neither 'tokens' nor 'text'")
    split = rec.get("split", "train")
    if split not in SPLITS:
        raise DataError(f"{path}: line {lineno}: split must be one of {SPLITS}")
    label = rec.get("label")
    if label is not None and not isinstance(label, str):
        label = str(label)
    return Document(id=doc_id, tokens=tokens, label=label, split=split)


def load_corpus(path, format: str = "jsonl", default_split: str = "train") -> Corpus:
    """Load a corpus from JSONL ({id, text|tokens, label?, split?}) or two-column TSV.

    Document ids are stable and input-ordered: explicit ids must form a
    dense [0, N) range; records without ids take their input position.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    if format == "jsonl":
        docs = [
            _doc_from_json(lineno, rec, pos, path)
            for pos, (lineno, rec) in enumerate(read_jsonl(path))
        ]
    elif format == "tsv":
        docs = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t", 1)
                if len(parts) != 2:
                    raise DataError(f"{path}: line {lineno}: expected 'label<TAB>text'")
                label, text = parts
                docs.append(
                    Document(
                        id=len(docs),
                        tokens=tuple(tokenize(text)),
                        label=label,
                        split=default_split,
                    )
                )
    else:
        raise DataError(f"unknown corpus format: {format!r}")
    return Corpus(docs)


def save_corpus(corpus: Corpus, path) -> None:
    """Write the normalized (tokenized) JSONL form."""
    with open(path, "w", encoding="utf-8") as fh:
        for d in corpus.docs:
            rec: dict = {"id": d.id, "tokens": list(d.tokens), "split": d.split}
            if d.label is not None:
                rec["label"] = d.label
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


@dataclass
class IdfTable:
    """idf(t) = ln(N / df(t)) over the document collection it was built from.

    Lookups of unknown tokens raise: a missing token at embedding time
    means the pipeline stages disagree about the vocabulary, which must
    surface instead of silently contributing zero weight.
    """

    entries: dict[str, float]
    num_docs: int

    def __getitem__(self, token: str) -> float:
        try:
            return self.entries[token]
        except KeyError:
            raise DataError(
                f"token {token!r} has no idf entry; idf table and token stream are misaligned"
            ) from None

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"num_docs": self.num_docs, "entries": self.entries}, fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "IdfTable":
        with open(path, "r", encoding="utf-8") as fh:
            blob = json.load(fh)
        return cls(entries=dict(blob["entries"]), num_docs=int(blob["num_docs"]))


def compute_idf(corpus: Corpus, token_streams: Sequence[Iterable[str]] | None = None) -> IdfTable:
    """Natural-log idf over one token stream per document.

    The stream defaults to the surface tokens; the pipeline passes
    sense-tagged streams after disambiguation. df counts documents
    containing the token at least once, so 0 <= idf <= ln(N).
    """
    if token_streams is None:
        token_streams = [d.tokens for d in corpus.docs]
    if len(token_streams) != corpus.num_docs:
        raise DataError(
            f"got {len(token_streams)} token streams for {corpus.num_docs} documents"
        )
    n = corpus.num_docs
    if n < 1:
        raise DataError("cannot compute idf over an empty corpus")
    df: Counter[str] = Counter()
    for stream in token_streams:
        df.update(set(stream))
    entries = {tok: math.log(n / count) for tok, count in df.items()}
    return IdfTable(entries=entries, num_docs=n)
