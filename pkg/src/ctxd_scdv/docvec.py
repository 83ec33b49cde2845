"""Word-topic vectors and their document-level averages.

A vocabulary entry with vector v, soft cluster posteriors p (length K)
and idf weight w yields the word-topic vector wtv = w * kron(p, v):
block o of length d holds w * p[o] * v. A document vector is the mean
of the word-topic vectors of its token occurrences.

On-disk layout (DVB1, little-endian): magic b"DVB1", u32 dim = K*d,
then one record per document of u32 doc_id + dim float32.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, IdfTable
from .errors import DataError
from .gmm import GmmModel, posterior_matrix
from .wsd import SenseVocabulary

log = logging.getLogger(__name__)

MAGIC = b"DVB1"
_HEADER = struct.Struct("<4sI")


def build_word_topic_vector(w_vec: np.ndarray, posteriors: np.ndarray, idf: float) -> np.ndarray:
    """idf-weighted concatenation of the K posterior-scaled copies of w_vec."""
    w_vec = np.asarray(w_vec, dtype=np.float64)
    posteriors = np.asarray(posteriors, dtype=np.float64)
    if w_vec.ndim != 1 or posteriors.ndim != 1:
        raise DataError("word vector and posteriors must be 1-d arrays")
    if idf < 0:
        raise DataError(f"idf weight must be nonnegative, got {idf}")
    return idf * np.kron(posteriors, w_vec)


def build_document_vector(
    occurrence_tokens: Sequence[str],
    wtv_lookup: Mapping[str, np.ndarray],
    doc_id: int | None = None,
) -> np.ndarray:
    """Mean word-topic vector over token occurrences (multiplicity counts).

    Occurrences absent from the lookup are skipped and excluded from the
    denominator; a document with no usable occurrence gets a zero vector.
    """
    if not wtv_lookup:
        raise DataError("empty word-topic-vector lookup")
    dim = len(next(iter(wtv_lookup.values())))
    total = np.zeros(dim)
    used = 0
    for tok in occurrence_tokens:
        wtv = wtv_lookup.get(tok)
        if wtv is None:
            continue
        if len(wtv) != dim:
            raise DataError(f"word-topic vector for {tok!r} has length {len(wtv)}, expected {dim}")
        total += wtv
        used += 1
    if used == 0:
        log.warning("document %s has no embeddable occurrence; emitting a zero vector",
                    "?" if doc_id is None else doc_id)
        return total
    return total / used


@dataclass
class DocumentVectorSet:
    """One (K*d)-vector per corpus document, ids dense in [0, N)."""

    matrix: np.ndarray  # (N, K*d) float64
    num_clusters: int | None = None  # K
    word_dim: int | None = None  # d
    provenance: str = ""  # config hash of the run that produced it

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DataError(f"document matrix must be 2-d, got shape {self.matrix.shape}")
        if self.num_clusters and self.word_dim:
            if self.matrix.shape[1] != self.num_clusters * self.word_dim:
                raise DataError(
                    f"document vectors have dim {self.matrix.shape[1]}, "
                    f"expected K*d = {self.num_clusters * self.word_dim}"
                )

    @property
    def num_docs(self) -> int:
        return len(self.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def vector(self, doc_id: int) -> np.ndarray:
        return self.matrix[doc_id]


def build_document_vectors(
    corpus: Corpus,
    streams: Sequence[Sequence[str]],
    vocab: SenseVocabulary,
    model: GmmModel,
    idf: IdfTable,
    unique_tokens: bool = False,
    provenance: str = "",
) -> DocumentVectorSet:
    """Assemble all document vectors without materializing per-word wtvs.

    streams[i] holds doc i's embeddable sense-tagged occurrences. With
    unique_tokens=True each distinct token counts once per document
    instead of once per occurrence.
    """
    if len(streams) != corpus.num_docs:
        raise DataError(f"got {len(streams)} token streams for {corpus.num_docs} documents")
    k, d = model.num_components, model.dim
    posteriors = posterior_matrix(model, vocab.vectors)  # (S, K)
    used = {t for stream in streams for t in stream}
    idf_vec = np.asarray([idf[t] if t in used else 0.0 for t in vocab.tokens])
    matrix = np.zeros((corpus.num_docs, k * d))
    for doc in corpus.docs:
        stream = streams[doc.id]
        if unique_tokens:
            stream = sorted(set(stream))
        if not stream:
            if doc.tokens:
                log.warning("document %d has no embeddable occurrence; zero vector", doc.id)
            continue
        rows = np.asarray([vocab.row_of(t) for t in stream], dtype=np.intp)
        weights = idf_vec[rows]  # (m,)
        # mean over occurrences of idf * kron(posterior, vector)
        contrib = (posteriors[rows] * weights[:, None]).T @ vocab.vectors[rows]  # (K, d)
        matrix[doc.id] = contrib.reshape(-1) / len(rows)
    return DocumentVectorSet(matrix=matrix, num_clusters=k, word_dim=d, provenance=provenance)


def sparsify(dv_set: DocumentVectorSet, percentage: float) -> DocumentVectorSet:
    """Zero entries below a fraction of the mean per-document extreme magnitude.

    Disabled by default in the pipeline; kept for parity experiments.
    """
    if not 0.0 <= percentage < 100.0:
        raise DataError(f"sparsify percentage must lie in [0, 100), got {percentage}")
    m = dv_set.matrix
    if len(m) == 0:
        return dv_set
    per_doc = (np.abs(m.max(axis=1)) + np.abs(m.min(axis=1))) / 2.0
    threshold = (percentage / 100.0) * float(per_doc.mean())
    out = m.copy()
    out[np.abs(out) < threshold] = 0.0
    return DocumentVectorSet(
        matrix=out,
        num_clusters=dv_set.num_clusters,
        word_dim=dv_set.word_dim,
        provenance=dv_set.provenance,
    )


def write_vectors(dv_set: DocumentVectorSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dv_set.dim))
        m = dv_set.matrix.astype("<f4")
        for doc_id in range(dv_set.num_docs):
            fh.write(struct.pack("<I", doc_id))
            fh.write(m[doc_id].tobytes())


def read_vectors(path) -> DocumentVectorSet:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    rec_size = 4 + 4 * dim
    body = len(blob) - _HEADER.size
    if body % rec_size:
        raise DataError(f"{path}: truncated record at byte offset "
                        f"{_HEADER.size + (body // rec_size) * rec_size}")
    n = body // rec_size
    doc_ids = np.empty(n, dtype=np.int64)
    matrix = np.empty((n, dim), dtype=np.float64)
    offset = _HEADER.size
    for i in range(n):
        doc_ids[i] = struct.unpack_from("<I", blob, offset)[0]
        offset += 4
        matrix[i] = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
    if not np.array_equal(doc_ids, np.arange(n)):
        order = np.argsort(doc_ids)
        if not np.array_equal(doc_ids[order], np.arange(n)):
            raise DataError(f"{path}: document ids are not dense in [0, N)")
        matrix = matrix[order]
    return DocumentVectorSet(matrix=matrix)


def export_csv(dv_set: DocumentVectorSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id"] + [f"x{i}" for i in range(dv_set.dim)])
        for doc_id in range(dv_set.num_docs):
            writer.writerow([doc_id] + [repr(float(x)) for x in dv_set.matrix[doc_id]])
