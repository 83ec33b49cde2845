"""Word-sense induction by per-word spherical k-means over occurrence vectors.

For each surface word, its occurrence vectors are clustered on the unit
sphere; the sense count grows from k=1 upward and is accepted while all
pairwise centroid cosines stay below the similarity threshold tau and
every cluster keeps a minimum size. Every occurrence is then tagged with
its nearest sense centroid, giving a sense-tagged corpus ("word#j").
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .errors import DataError
from .store import ContextualEmbeddingStore
from .utils import ordered_map, read_jsonl, stable_seed

log = logging.getLogger(__name__)

_OBJECTIVE_SLACK = 1e-9


@dataclass(frozen=True)
class WsdLimits:
    """Guardrails for sense-count selection.

    Words with fewer than min_occurrences occurrences stay monosemous;
    a candidate k is rejected when any cluster falls below
    min_cluster_size, since rare senses cannot be estimated stably.
    """

    k_max: int = 10
    min_occurrences: int = 10
    min_cluster_size: int = 5


@dataclass
class SphericalKmeansResult:
    centroids: np.ndarray  # (k, d), unit rows
    assignments: np.ndarray  # (n,) int, values in [0, k)
    objective_trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def normalize_rows(vectors: np.ndarray, context: str = "vector") -> np.ndarray:
    """Project rows onto the unit sphere; zero rows are a hard error."""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise DataError(f"zero-norm {context} at index {int(bad[0])}")
    return vectors / norms[:, None]


def _kmeanspp_indices(units: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding with squared chordal distance 2(1 - cos)."""
    n = len(units)
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = rng.integers(n)
    # squared Euclidean distance between unit vectors
    d2 = 2.0 - 2.0 * (units @ units[chosen[0]])
    np.maximum(d2, 0.0, out=d2)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            chosen[j] = rng.integers(n)
        else:
            chosen[j] = rng.choice(n, p=d2 / total)
        np.minimum(d2, 2.0 - 2.0 * (units @ units[chosen[j]]), out=d2)
        np.maximum(d2, 0.0, out=d2)
    return chosen


def _mean_directions(units: np.ndarray, assignments: np.ndarray, k: int,
                     fallback: np.ndarray) -> np.ndarray:
    """Renormalized per-cluster means; a zero mean keeps the old centroid."""
    membership = np.zeros((len(units), k))
    membership[np.arange(len(units)), assignments] = 1.0
    sums = membership.T @ units
    norms = np.linalg.norm(sums, axis=1)
    out = fallback.copy()
    ok = norms > 0.0
    out[ok] = sums[ok] / norms[ok, None]
    return out


def spherical_kmeans(
    vectors: np.ndarray,
    k: int,
    seed: int,
    max_iters: int = 100,
) -> SphericalKmeansResult:
    """Lloyd iterations on the unit sphere with k-means++ seeding.

    Assignment maximizes cosine to a centroid (ties to the lowest
    centroid id); the update step renormalizes the cluster mean, which
    maximizes the summed cosine for a fixed assignment, so the objective
    is non-decreasing across iterations. Deterministic given
    (vectors, k, seed). Empty clusters are reseeded at the worst-fit
    point.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DataError(f"expected a 2-d array of vectors, got shape {vectors.shape}")
    n = len(vectors)
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if k > n:
        raise DataError(f"cannot form {k} clusters from {n} vectors")
    units = normalize_rows(vectors, context="occurrence vector")
    rng = np.random.default_rng(seed)
    centroids = units[_kmeanspp_indices(units, k, rng)].copy()

    assignments = np.full(n, -1, dtype=np.intp)
    trace: list[float] = []
    for _ in range(max_iters):
        sims = units @ centroids.T  # (n, k)
        new_assignments = np.argmax(sims, axis=1)  # first max -> lowest sense id
        objective = float(sims[np.arange(n), new_assignments].sum())
        if trace and objective < trace[-1] - _OBJECTIVE_SLACK:
            raise AssertionError(
                f"spherical k-means objective decreased: {trace[-1]} -> {objective}"
            )
        trace.append(objective)
        changed = not np.array_equal(new_assignments, assignments)
        assignments = new_assignments
        centroids = _mean_directions(units, assignments, k, centroids)
        sizes = np.bincount(assignments, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size:
            # give each empty cluster the point currently represented worst
            fit = (units * centroids[assignments]).sum(axis=1)
            for c in empty:
                worst = int(np.argmin(fit))
                centroids[c] = units[worst]
                fit[worst] = np.inf
            changed = True
        if not changed:
            break
    return SphericalKmeansResult(centroids=centroids, assignments=assignments,
                                 objective_trace=trace)


def max_pairwise_cosine(centroids: np.ndarray) -> float:
    if len(centroids) < 2:
        return -1.0
    sims = centroids @ centroids.T
    return float(np.max(sims[np.triu_indices(len(centroids), k=1)]))


def select_sense_count(
    vectors: np.ndarray,
    tau: float,
    seed: int,
    limits: WsdLimits = WsdLimits(),
) -> SphericalKmeansResult:
    """Grow k until centroids stop being tau-separated or clusters get too small.

    k=1 is always acceptable; the first k whose solution has a centroid
    pair with cosine >= tau, or a cluster smaller than min_cluster_size,
    stops the search and the previous solution wins.
    """
    if not 0.0 < tau < 1.0:
        raise DataError(f"tau must lie in (0, 1), got {tau}")
    vectors = np.asarray(vectors, dtype=np.float64)
    n = len(vectors)
    if n < 1:
        raise DataError("select_sense_count needs at least one occurrence vector")
    best = spherical_kmeans(vectors, 1, stable_seed(seed, 1))
    if n < limits.min_occurrences:
        return best
    for k in range(2, min(limits.k_max, n) + 1):
        candidate = spherical_kmeans(vectors, k, stable_seed(seed, k))
        if max_pairwise_cosine(candidate.centroids) >= tau:
            break
        if int(candidate.cluster_sizes().min()) < limits.min_cluster_size:
            break
        best = candidate
    return best


@dataclass
class WordSenses:
    word: str
    centroids: np.ndarray  # (k, d) unit rows
    doc_ids: np.ndarray  # (n_occ,)
    token_indices: np.ndarray  # (n_occ,)
    senses: np.ndarray  # (n_occ,) 1-based sense ids

    @property
    def k(self) -> int:
        return len(self.centroids)


class SenseInventory:
    """Per-word sense centroids plus a sense tag for every occurrence."""

    def __init__(self, words: Sequence[WordSenses], tau: float, dim: int):
        self.words: dict[str, WordSenses] = {w.word: w for w in words}
        self.tau = tau
        self.dim = dim

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    def sense_of(self, word: str, doc_id: int, token_index: int) -> int:
        ws = self.words[word]
        mask = (ws.doc_ids == doc_id) & (ws.token_indices == token_index)
        rows = np.flatnonzero(mask)
        if not rows.size:
            raise DataError(f"no sense tag for occurrence ({doc_id}, {token_index}) of {word!r}")
        return int(ws.senses[rows[0]])

    def occurrence_tags(self) -> dict[tuple[int, int], str]:
        """Map (doc_id, token_index) -> sense-tagged token 'word#j'."""
        tags: dict[tuple[int, int], str] = {}
        for word, ws in self.words.items():
            for d, t, s in zip(ws.doc_ids, ws.token_indices, ws.senses):
                tags[(int(d), int(t))] = f"{word}#{int(s)}"
        return tags

    def sense_tagged_streams(self, corpus: Corpus) -> list[list[str]]:
        """Per-document sense-tagged token streams; untagged occurrences are skipped."""
        tags = self.occurrence_tags()
        streams: list[list[str]] = []
        for doc in corpus.docs:
            stream = []
            for pos in range(len(doc.tokens)):
                tag = tags.get((doc.id, pos))
                if tag is not None:
                    stream.append(tag)
            streams.append(stream)
        return streams


@dataclass
class SenseVocabulary:
    """One entry per (word, sense): the sense-tagged token, its vector, its count."""

    tokens: list[str]  # "word#j", sorted by (word, sense id)
    vectors: np.ndarray  # (num_entries, d)
    counts: np.ndarray  # (num_entries,) occurrence counts

    def __post_init__(self):
        self.row_index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def row_of(self, token: str) -> int:
        try:
            return self.row_index[token]
        except KeyError:
            raise DataError(f"unknown sense-tagged token {token!r}") from None


def build_sense_vocabulary(inventory: SenseInventory) -> SenseVocabulary:
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    counts: list[int] = []
    for word in sorted(inventory.words):
        ws = inventory.words[word]
        for j in range(1, ws.k + 1):
            tokens.append(f"{word}#{j}")
            vectors.append(ws.centroids[j - 1])
            counts.append(int(np.sum(ws.senses == j)))
    return SenseVocabulary(
        tokens=tokens,
        vectors=np.asarray(vectors, dtype=np.float64).reshape(len(tokens), inventory.dim),
        counts=np.asarray(counts, dtype=np.int64),
    )


def nearest_sense(vector: np.ndarray, centroids: np.ndarray) -> int:
    """1-based id of the max-cosine centroid; ties break to the lowest id."""
    v = np.asarray(vector, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DataError("cannot assign a sense to a zero-norm vector")
    sims = centroids @ (v / norm)
    return int(np.argmax(sims)) + 1


def induce_senses(
    store: ContextualEmbeddingStore,
    tau: float,
    seed: int,
    limits: WsdLimits = WsdLimits(),
    force_single_sense: bool = False,
) -> SenseInventory:
    """Cluster every word's occurrences and tag each occurrence with its sense.

    Per-word jobs are independent; each derives its own seed from
    (seed, word) so results do not depend on scheduling or worker count.
    force_single_sense pins k=1 for every word (the weighted-average
    ablation), making each word's single centroid the renormalized mean
    of its occurrence vectors.
    """
    words = store.words

    def _solve(word: str) -> WordSenses:
        rows = store.occurrence_rows(word)
        vectors = store.vectors[rows].astype(np.float64)
        word_seed = stable_seed(seed, "wsd", word)
        try:
            if force_single_sense:
                solution = spherical_kmeans(vectors, 1, stable_seed(word_seed, 1))
            else:
                solution = select_sense_count(vectors, tau, word_seed, limits)
        except DataError as exc:
            raise DataError(f"word {word!r}: {exc}") from exc
        units = normalize_rows(vectors, context=f"occurrence vector of {word!r}")
        sims = units @ solution.centroids.T
        senses = np.argmax(sims, axis=1) + 1
        return WordSenses(
            word=word,
            centroids=solution.centroids,
            doc_ids=store.doc_ids[rows].astype(np.int64),
            token_indices=store.token_indices[rows].astype(np.int64),
            senses=senses.astype(np.int64),
        )

    solved = ordered_map(_solve, words)
    return SenseInventory(solved, tau=tau, dim=store.dim)


def reassign_senses(inventory: SenseInventory, store: ContextualEmbeddingStore) -> SenseInventory:
    """Re-tag every occurrence against the final centroids (fixed-point check)."""
    words = []
    for word in sorted(inventory.words):
        ws = inventory.words[word]
        rows = store.occurrence_rows(word)
        if len(rows) != len(ws.doc_ids):
            raise DataError(f"occurrence count changed for {word!r}")
        units = normalize_rows(store.vectors[rows].astype(np.float64),
                               context=f"occurrence vector of {word!r}")
        senses = np.argmax(units @ ws.centroids.T, axis=1) + 1
        words.append(
            WordSenses(
                word=word,
                centroids=ws.centroids,
                doc_ids=store.doc_ids[rows].astype(np.int64),
                token_indices=store.token_indices[rows].astype(np.int64),
                senses=senses.astype(np.int64),
            )
        )
    return SenseInventory(words, tau=inventory.tau, dim=inventory.dim)


def polysemy_distribution(inventory: SenseInventory) -> dict[int, float]:
    """Fraction of the surface vocabulary having each sense count; sums to 1."""
    if not inventory.words:
        return {}
    counts: dict[int, int] = {}
    for ws in inventory.words.values():
        counts[ws.k] = counts.get(ws.k, 0) + 1
    total = len(inventory.words)
    return {k: counts[k] / total for k in sorted(counts)}


def save_inventory(inventory: SenseInventory, path) -> None:
    """JSONL, one line per word: {"w", "k", "centroids", "tags"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(inventory.words):
            ws = inventory.words[word]
            rec = {
                "w": word,
                "k": ws.k,
                "centroids": [[float(x) for x in c] for c in ws.centroids],
                "tags": [
                    [int(d), int(t), int(s)]
                    for d, t, s in zip(ws.doc_ids, ws.token_indices, ws.senses)
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def load_inventory(path, tau: float) -> SenseInventory:
    words: list[WordSenses] = []
    dim: int | None = None
    for lineno, rec in read_jsonl(path):
        try:
            centroids = np.asarray(rec["centroids"], dtype=np.float64)
            tags = np.asarray(rec["tags"], dtype=np.int64).reshape(-1, 3)
            words.append(
                WordSenses(
                    word=rec["w"],
                    centroids=centroids,
                    doc_ids=tags[:, 0],
                    token_indices=tags[:, 1],
                    senses=tags[:, 2],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: malformed sense record") from exc
        if int(rec["k"]) != len(centroids):
            raise DataError(f"{path}: line {lineno}: k does not match centroid count")
        if dim is None:
            dim = centroids.shape[1]
        elif centroids.shape[1] != dim:
            raise DataError(f"{path}: line {lineno}: centroid dim mismatch")
    if dim is None:
        raise DataError(f"{path}: empty sense inventory")
    return SenseInventory(words, tau=tau, dim=dim)
