"""Contextual token-embedding store and its on-disk formats.

Binary layout (CEB1, little-endian):

    magic   4 bytes  b"CEB1"
    version u16      1
    dim     u32      vector dimensionality d
    record* u32 doc_id, u32 token_index, u16 token byte length L,
            L bytes UTF-8 surface token, d x float32 vector

A JSONL mirror ({"doc": int, "tok": int, "w": str, "v": [floats]}) is
accepted for debugging. Vectors are stored float32; downstream math
promotes to float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .errors import DataError
from .utils import read_jsonl

MAGIC = b"CEB1"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_REC_FIXED = struct.Struct("<IIH")


class ContextualEmbeddingStore:
    """Per-occurrence contextual vectors keyed by (doc_id, token_index).

    Records are kept in canonical (doc_id, token_index) order and the
    store is immutable after construction, so writes are deterministic
    and per-word occurrence lists come back in document order.
    """

    def __init__(
        self,
        dim: int,
        doc_ids: Sequence[int],
        token_indices: Sequence[int],
        tokens: Sequence[str],
        vectors: np.ndarray,
    ):
        if dim < 1:
            raise DataError(f"store dimensionality must be >= 1, got {dim}")
        self.dim = int(dim)
        doc_ids = np.asarray(doc_ids, dtype=np.uint32)
        token_indices = np.asarray(token_indices, dtype=np.uint32)
        vectors = np.asarray(vectors, dtype=np.float32).reshape(len(doc_ids), self.dim)
        if not (len(doc_ids) == len(token_indices) == len(tokens) == len(vectors)):
            raise DataError("store record arrays have mismatched lengths")
        order = np.lexsort((token_indices, doc_ids))
        self.doc_ids = doc_ids[order]
        self.token_indices = token_indices[order]
        self.tokens = [tokens[i] for i in order]
        self.vectors = vectors[order]
        keys = self.doc_ids.astype(np.uint64) << np.uint64(32) | self.token_indices.astype(np.uint64)
        if len(np.unique(keys)) != len(keys):
            raise DataError("duplicate (doc_id, token_index) record in store")
        self._word_index: dict[str, list[int]] = {}
        for i, tok in enumerate(self.tokens):
            self._word_index.setdefault(tok, []).append(i)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ContextualEmbeddingStore)
            and self.dim == other.dim
            and np.array_equal(self.doc_ids, other.doc_ids)
            and np.array_equal(self.token_indices, other.token_indices)
            and self.tokens == other.tokens
            and np.array_equal(self.vectors, other.vectors)
        )

    @classmethod
    def from_records(cls, dim: int, records: Iterable[tuple[int, int, str, Sequence[float]]]):
        records = list(records)
        vecs = np.asarray([r[3] for r in records], dtype=np.float32).reshape(len(records), dim)
        return cls(
            dim,
            [r[0] for r in records],
            [r[1] for r in records],
            [r[2] for r in records],
            vecs,
        )

    @property
    def words(self) -> list[str]:
        return sorted(self._word_index)

    def occurrences_of(self, word: str) -> list[tuple[int, int, np.ndarray]]:
        """All records whose surface token equals word, in (doc, position) order."""
        idx = self._word_index.get(word, [])
        return [(int(self.doc_ids[i]), int(self.token_indices[i]), self.vectors[i]) for i in idx]

    def occurrence_rows(self, word: str) -> list[int]:
        return list(self._word_index.get(word, []))

    def validate_alignment(self, corpus: Corpus) -> None:
        """Check every record points at a matching corpus token."""
        for i in range(len(self)):
            doc_id = int(self.doc_ids[i])
            tok_idx = int(self.token_indices[i])
            if doc_id >= corpus.num_docs:
                raise DataError(f"store record references unknown doc {doc_id}")
            doc_tokens = corpus.docs[doc_id].tokens
            if tok_idx >= len(doc_tokens):
                raise DataError(
                    f"store record references token {tok_idx} of doc {doc_id}, "
                    f"which has only {len(doc_tokens)} tokens"
                )
            if doc_tokens[tok_idx].casefold() != self.tokens[i].casefold():
                raise DataError(
                    f"alignment mismatch at doc {doc_id} token {tok_idx}: "
                    f"corpus has {doc_tokens[tok_idx]!r}, store has {self.tokens[i]!r}"
                )


def write_store(store: ContextualEmbeddingStore, path, format: str = "ceb1") -> None:
    """Serialize; rewriting the same store yields byte-identical files."""
    if format == "ceb1":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, store.dim))
            for i in range(len(store)):
                token_bytes = store.tokens[i].encode("utf-8")
                if len(token_bytes) > 0xFFFF:
                    raise DataError(f"token too long to serialize: {store.tokens[i][:32]!r}...")
                fh.write(
                    _REC_FIXED.pack(
                        int(store.doc_ids[i]), int(store.token_indices[i]), len(token_bytes)
                    )
                )
                fh.write(token_bytes)
                fh.write(store.vectors[i].astype("<f4").tobytes())
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(len(store)):
                rec = {
                    "doc": int(store.doc_ids[i]),
                    "tok": int(store.token_indices[i]),
                    "w": store.tokens[i],
                    "v": [float(x) for x in store.vectors[i]],
                }
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    else:
        raise DataError(f"unknown store format: {format!r}")


def read_store(
    path,
    format: str = "ceb1",
    expected_dim: int | None = None,
    corpus: Corpus | None = None,
) -> ContextualEmbeddingStore:
    """Load a store, optionally validating dimensionality and corpus alignment."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding store not found: {path}")
    if format == "ceb1":
        store = _read_ceb1(path)
    elif format == "jsonl":
        store = _read_jsonl_store(path)
    else:
        raise DataError(f"unknown store format: {format!r}")
    if expected_dim is not None and store.dim != expected_dim:
        raise DataError(f"{path}: store dim is {store.dim}, expected {expected_dim}")
    if corpus is not None:
        store.validate_alignment(corpus)
    return store


def _read_ceb1(path: Path) -> ContextualEmbeddingStore:
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    vec_bytes = 4 * dim
    offset = _HEADER.size
    doc_ids: list[int] = []
    token_indices: list[int] = []
    tokens: list[str] = []
    vec_chunks: list[bytes] = []
    while offset < len(blob):
        rec_start = offset
        if offset + _REC_FIXED.size > len(blob):
            raise DataError(f"{path}: truncated record header at byte offset {rec_start}")
        doc_id, tok_idx, tok_len = _REC_FIXED.unpack_from(blob, offset)
        offset += _REC_FIXED.size
        if offset + tok_len + vec_bytes > len(blob):
            raise DataError(f"{path}: truncated record at byte offset {rec_start}")
        try:
            token = blob[offset : offset + tok_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: invalid UTF-8 token at byte offset {offset}") from exc
        offset += tok_len
        vec_chunks.append(blob[offset : offset + vec_bytes])
        offset += vec_bytes
        doc_ids.append(doc_id)
        token_indices.append(tok_idx)
        tokens.append(token)
    if vec_chunks:
        vectors = np.frombuffer(b"".join(vec_chunks), dtype="<f4").reshape(len(tokens), dim)
    else:
        vectors = np.zeros((0, dim), dtype=np.float32)
    return ContextualEmbeddingStore(dim, doc_ids, token_indices, tokens, vectors)


def _read_jsonl_store(path: Path) -> ContextualEmbeddingStore:
    doc_ids: list[int] = []
    token_indices: list[int] = []
    tokens: list[str] = []
    vecs: list[list[float]] = []
    dim: int | None = None
    for lineno, rec in read_jsonl(path):
        try:
            doc_ids.append(int(rec["doc"]))
            token_indices.append(int(rec["tok"]))
            tokens.append(str(rec["w"]))
            vecs.append([float(x) for x in rec["v"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: malformed store record") from exc
        if dim is None:
            dim = len(vecs[-1])
        elif len(vecs[-1]) != dim:
            raise DataError(
                f"{path}: line {lineno}: vector has {len(vecs[-1])} entries, expected {dim}"
            )
    if dim is None:
        raise DataError(f"{path}: JSONL store is empty; dimensionality unknown")
    vectors = np.asarray(vecs, dtype=np.float32)
    return ContextualEmbeddingStore(dim, doc_ids, token_indices, tokens, vectors)
