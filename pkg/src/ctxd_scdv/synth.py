"""Planted-structure corpora and embedding stores for transformer-free testing.

Every ambiguous word gets a set of orthonormal sense directions; each
occurrence's vector is drawn around the sense its document's class
selects, so ground-truth sense tags exist for scoring. Class-specific
words make classes linearly separable by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, Document
from .errors import DataError
from .store import ContextualEmbeddingStore
from .wsd import SenseInventory

AMBIGUOUS_PREFIX = "amb"


@dataclass(frozen=True)
class PlantedSpec:
    num_classes: int = 2
    docs_per_class: int = 200
    vocab_size: int = 50
    ambiguous_word_count: int = 10
    senses_per_ambiguous_word: int = 2
    dim: int = 16
    noise_sigma: float = 0.05
    seed: int = 0
    doc_length: int = 30
    train_fraction: float = 0.7


@dataclass
class PlantedData:
    corpus: Corpus
    store: ContextualEmbeddingStore
    sense_tags: dict[tuple[int, int], int]  # (doc, pos) -> planted sense index (0-based)
    planted_sense_counts: dict[str, int]
    directions: dict[str, np.ndarray]  # word -> (senses, dim) unit directions


def _validate(spec: PlantedSpec) -> None:
    if spec.num_classes < 2:
        raise DataError("need at least 2 classes")
    if spec.senses_per_ambiguous_word < 1:
        raise DataError("senses per ambiguous word must be >= 1")
    if spec.senses_per_ambiguous_word > spec.num_classes:
        raise DataError(
            f"infeasible spec: {spec.senses_per_ambiguous_word} senses per word but only "
            f"{spec.num_classes} classes to select them"
        )
    if spec.senses_per_ambiguous_word > spec.dim:
        raise DataError("cannot orthogonalize more senses than dimensions")
    if spec.vocab_size < spec.ambiguous_word_count + spec.num_classes + 1:
        raise DataError(
            "vocab too small: need ambiguous words plus one class word per class plus filler"
        )
    if spec.doc_length < 1 or spec.docs_per_class < 2:
        raise DataError("documents must be nonempty and classes need train and test docs")
    if not 0.0 < spec.train_fraction < 1.0:
        raise DataError("train_fraction must lie in (0, 1)")


def _orthonormal_directions(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, count)))
    q = q * np.sign(np.diag(r))[None, :]  # fix reflection ambiguity
    return q.T.copy()


def generate(spec: PlantedSpec) -> PlantedData:
    """Deterministic corpus + store + ground-truth sense tags for the spec."""
    _validate(spec)
    rng = np.random.default_rng(spec.seed)

    ambiguous = [f"{AMBIGUOUS_PREFIX}{i}" for i in range(spec.ambiguous_word_count)]
    remaining = spec.vocab_size - spec.ambiguous_word_count
    per_class_words = max(1, remaining // (2 * spec.num_classes))
    class_words = {
        c: [f"c{c}w{j}" for j in range(per_class_words)] for c in range(spec.num_classes)
    }
    n_filler = remaining - per_class_words * spec.num_classes
    fillers = [f"fill{j}" for j in range(n_filler)]

    directions: dict[str, np.ndarray] = {}
    for word in ambiguous:
        directions[word] = _orthonormal_directions(rng, spec.dim, spec.senses_per_ambiguous_word)
    for word in [w for ws in class_words.values() for w in ws] + fillers:
        v = rng.standard_normal(spec.dim)
        directions[word] = (v / np.linalg.norm(v))[None, :]

    docs: list[Document] = []
    records: list[tuple[int, int, str, np.ndarray]] = []
    sense_tags: dict[tuple[int, int], int] = {}
    n_train = max(1, min(spec.docs_per_class - 1, round(spec.train_fraction * spec.docs_per_class)))
    doc_id = 0
    for c in range(spec.num_classes):
        for j in range(spec.docs_per_class):
            tokens: list[str] = []
            for pos in range(spec.doc_length):
                u = rng.random()
                if u < 0.35:
                    word = class_words[c][int(rng.integers(per_class_words))]
                elif u < 0.70 or not fillers:
                    word = ambiguous[int(rng.integers(len(ambiguous)))]
                else:
                    word = fillers[int(rng.integers(len(fillers)))]
                tokens.append(word)
                dirs = directions[word]
                if len(dirs) > 1:
                    sense = c % len(dirs)
                    sense_tags[(doc_id, pos)] = sense
                else:
                    sense = 0
                base = dirs[sense]
                if spec.noise_sigma == 0.0:
                    vec = base
                else:
                    noisy = base + spec.noise_sigma * rng.standard_normal(spec.dim)
                    vec = noisy / np.linalg.norm(noisy)
                records.append((doc_id, pos, word, vec.astype(np.float32)))
            docs.append(
                Document(
                    id=doc_id,
                    tokens=tuple(tokens),
                    label=f"class{c}",
                    split="train" if j < n_train else "test",
                )
            )
            doc_id += 1

    corpus = Corpus(docs)
    store = ContextualEmbeddingStore(
        spec.dim,
        [r[0] for r in records],
        [r[1] for r in records],
        [r[2] for r in records],
        np.asarray([r[3] for r in records], dtype=np.float32),
    )
    return PlantedData(
        corpus=corpus,
        store=store,
        sense_tags=sense_tags,
        planted_sense_counts={w: len(d) for w, d in directions.items()},
        directions=directions,
    )


def adjusted_rand_index(labels_a: Sequence[int], labels_b: Sequence[int]) -> float:
    """Chance-corrected agreement between two labelings of the same items."""
    if len(labels_a) != len(labels_b):
        raise DataError("labelings must cover the same items")
    n = len(labels_a)
    if n == 0:
        raise DataError("cannot score empty labelings")
    contingency: dict[tuple[int, int], int] = {}
    for a, b in zip(labels_a, labels_b):
        contingency[(a, b)] = contingency.get((a, b), 0) + 1
    a_sums: dict[int, int] = {}
    b_sums: dict[int, int] = {}
    for (a, b), cnt in contingency.items():
        a_sums[a] = a_sums.get(a, 0) + cnt
        b_sums[b] = b_sums.get(b, 0) + cnt
    comb2 = lambda m: m * (m - 1) // 2  # noqa: E731
    index = sum(comb2(c) for c in contingency.values())
    sum_a = sum(comb2(c) for c in a_sums.values())
    sum_b = sum(comb2(c) for c in b_sums.values())
    total = comb2(n)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


@dataclass
class RecoveryReport:
    sense_count_accuracy: float  # fraction of ambiguous words with recovered k == planted
    mean_ari: float  # mean ARI between recovered and planted tags
    per_word: dict[str, dict]


def score_recovery(planted: PlantedData, inventory: SenseInventory) -> RecoveryReport:
    """How well induced senses match the planted ones, over ambiguous words."""
    per_word: dict[str, dict] = {}
    hits = 0
    aris = []
    ambiguous = [w for w, k in planted.planted_sense_counts.items() if k > 1]
    if not ambiguous:
        raise DataError("planted data has no ambiguous words to score")
    for word in ambiguous:
        ws = inventory.words.get(word)
        if ws is None:
            raise DataError(f"ambiguous word {word!r} missing from inventory")
        truth = [
            planted.sense_tags[(int(d), int(t))]
            for d, t in zip(ws.doc_ids, ws.token_indices)
        ]
        ari = adjusted_rand_index(truth, [int(s) for s in ws.senses])
        correct = ws.k == planted.planted_sense_counts[word]
        hits += correct
        aris.append(ari)
        per_word[word] = {"planted_k": planted.planted_sense_counts[word],
                          "recovered_k": ws.k, "ari": ari}
    return RecoveryReport(
        sense_count_accuracy=hits / len(ambiguous),
        mean_ari=float(np.mean(aris)),
        per_word=per_word,
    )
