"""Evaluation protocols over document vectors.

Supervised classification with a cross-validated linear classifier,
limited-data sweeps with nested stratified subsamples, prototypical
few-shot labeling, concept-project matching by thresholded cosine, and
sentence-similarity scoring by Pearson correlation.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .docvec import DocumentVectorSet
from .errors import ConfigError, DataError, NumericError
from .utils import stable_seed

log = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


# ---------------------------------------------------------------------------
# linear classifier


@dataclass
class LinearModel:
    """One-vs-rest L2-regularized hinge-loss linear classifiers."""

    labels: tuple[str, ...]  # sorted; argmax ties resolve to the first = smallest
    weights: np.ndarray  # (num_labels, D)
    biases: np.ndarray  # (num_labels,)
    C: float

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights.T + self.biases

    def predict(self, X: np.ndarray) -> list[str]:
        scores = self.decision_scores(X)
        return [self.labels[i] for i in np.argmax(scores, axis=1)]


def train_linear(
    X: np.ndarray,
    y: Sequence[str],
    C: float,
    seed: int,
    epochs: int = 100,
) -> LinearModel:
    """Deterministic epoch-based subgradient descent on the hinge objective.

    Steps follow the 1/(lambda*t) schedule with lambda = 1/(C*n); the
    per-epoch sample order comes from the seed, so training is fully
    reproducible. All classes train jointly, one weight row each.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DataError("training features contain NaN or infinite values")
    labels = tuple(sorted(set(y)))
    if len(labels) < 2:
        raise DataError(f"need at least 2 classes to train, got {labels}")
    if C <= 0:
        raise ConfigError(f"regularization parameter C must be positive, got {C}")
    n, dim = X.shape
    label_row = {lab: i for i, lab in enumerate(labels)}
    Y = -np.ones((len(labels), n))
    for i, lab in enumerate(y):
        Y[label_row[lab], i] = 1.0

    # constant feature carries the bias so it follows the same schedule
    Xa = np.hstack([X, np.ones((n, 1))])
    lam = 1.0 / (C * n)
    W = np.zeros((len(labels), dim + 1))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            x = Xa[i]
            margin = Y[:, i] * (W @ x)
            violating = margin < 1.0
            W *= 1.0 - eta * lam
            if violating.any():
                yv = Y[violating, i]
                W[violating] += eta * yv[:, None] * x
    return LinearModel(labels=labels, weights=W[:, :dim].copy(), biases=W[:, dim].copy(), C=C)


def accuracy(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    if not y_true:
        raise DataError("cannot score an empty label sequence")
    return sum(a == b for a, b in zip(y_true, y_pred)) / len(y_true)


def macro_f1(y_true: Sequence[str], y_pred: Sequence[str],
             labels: Sequence[str] | None = None) -> float:
    """Unweighted mean of per-class F1; empty classes contribute 0."""
    if labels is None:
        labels = sorted(set(y_true) | set(y_pred))
    scores = []
    for lab in labels:
        tp = sum(t == lab and p == lab for t, p in zip(y_true, y_pred))
        fp = sum(t != lab and p == lab for t, p in zip(y_true, y_pred))
        fn = sum(t == lab and p != lab for t, p in zip(y_true, y_pred))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def stratified_folds(y: Sequence[str], num_folds: int, seed: int) -> list[np.ndarray]:
    """Per-class shuffled round-robin deal, so every fold sees every class when possible."""
    if num_folds < 2:
        raise ConfigError(f"need at least 2 folds, got {num_folds}")
    folds: list[list[int]] = [[] for _ in range(num_folds)]
    y = list(y)
    for lab in sorted(set(y)):
        idx = np.asarray([i for i, v in enumerate(y) if v == lab])
        rng = np.random.default_rng(stable_seed(seed, "fold", lab))
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            folds[pos % num_folds].append(int(i))
    return [np.asarray(sorted(f), dtype=np.intp) for f in folds]


def tune_C(
    X: np.ndarray,
    y: Sequence[str],
    grid: Sequence[float] = DEFAULT_C_GRID,
    seed: int = 0,
    num_folds: int = 5,
    epochs: int = 100,
) -> float:
    """Stratified CV on macro-F1; ties go to the smallest C."""
    if not grid:
        raise ConfigError("C grid must not be empty")
    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    folds = stratified_folds(y, num_folds, seed)
    all_idx = np.arange(len(y))
    scores: dict[float, float] = {}
    for C in grid:
        fold_scores = []
        for f, test_idx in enumerate(folds):
            if not len(test_idx):
                continue
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[test_idx] = False
            train_idx = all_idx[train_mask]
            if len({y[i] for i in train_idx}) < 2:
                continue  # a singleton class fell entirely into this test fold
            model = train_linear(
                X[train_idx], [y[i] for i in train_idx], C,
                seed=stable_seed(seed, "cv", f), epochs=epochs,
            )
            preds = model.predict(X[test_idx])
            fold_scores.append(macro_f1([y[i] for i in test_idx], preds))
        if not fold_scores:
            raise DataError("no usable CV fold: every fold leaves fewer than 2 classes")
        scores[C] = float(np.mean(fold_scores))
    best = max(scores.values())
    return min(c for c, s in scores.items() if s == best)


# ---------------------------------------------------------------------------
# protocol runs


@dataclass
class EvalRun:
    """Per-run metrics for one protocol plus recomputable aggregates."""

    protocol: str
    config: dict
    seeds: list[int]
    per_run: list[dict] = field(default_factory=list)

    def metric_values(self, metric: str) -> np.ndarray:
        return np.asarray([run[metric] for run in self.per_run], dtype=np.float64)

    @property
    def mean(self) -> dict[str, float]:
        return {m: float(self.metric_values(m).mean()) for m in self._metrics()}

    @property
    def std(self) -> dict[str, float]:
        out = {}
        for m in self._metrics():
            vals = self.metric_values(m)
            out[m] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        return out

    def _metrics(self) -> list[str]:
        if not self.per_run:
            return []
        return [k for k, v in self.per_run[0].items() if isinstance(v, (int, float))]

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "config": self.config,
            "seeds": self.seeds,
            "per_run": self.per_run,
            "mean": self.mean,
            "std": self.std,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            metrics = self._metrics()
            writer.writerow(["run", "seed"] + metrics)
            for i, run in enumerate(self.per_run):
                writer.writerow([i, self.seeds[i]] + [run[m] for m in metrics])
            writer.writerow(["mean", ""] + [self.mean[m] for m in metrics])
            writer.writerow(["std", ""] + [self.std[m] for m in metrics])


def _train_test_split(dv_set: DocumentVectorSet, corpus: Corpus):
    train_ids = corpus.split_ids("train")
    test_ids = corpus.split_ids("test")
    if not train_ids or not test_ids:
        raise DataError("corpus must contain both train and test documents")
    X_train = dv_set.matrix[train_ids]
    X_test = dv_set.matrix[test_ids]
    return train_ids, test_ids, X_train, X_test


def subsample_indices(y: Sequence[str], fraction: float, seed: int) -> np.ndarray:
    """Stratified nested subsample: the per-class order is fixed by the seed
    and a fraction takes a prefix, so smaller fractions are subsets of
    larger ones for the same seed."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must lie in (0, 1], got {fraction}")
    y = list(y)
    classes = sorted(set(y))
    if fraction * len(y) < len(classes):
        raise DataError(
            f"fraction {fraction} of {len(y)} examples cannot cover {len(classes)} classes"
        )
    chosen: list[int] = []
    for lab in classes:
        idx = np.asarray([i for i, v in enumerate(y) if v == lab])
        rng = np.random.default_rng(stable_seed(seed, "subsample", lab))
        idx = idx[rng.permutation(len(idx))]
        take = math.ceil(fraction * len(idx))
        chosen.extend(int(i) for i in idx[:take])
    return np.asarray(sorted(chosen), dtype=np.intp)


def evaluate_classification(
    dv_set: DocumentVectorSet,
    corpus: Corpus,
    fraction: float = 1.0,
    repeats: int = 5,
    base_seed: int = 0,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    epochs: int = 100,
) -> EvalRun:
    """Tune C, train, and score on the test split; repeated over seeds.

    fraction < 1 draws the stratified nested subsample chain for that
    repeat's seed, so 10% data is contained in 20% data and so on.
    """
    train_ids, test_ids, X_train, X_test = _train_test_split(dv_set, corpus)
    y_train = corpus.labels_for(train_ids)
    y_test = corpus.labels_for(test_ids)
    seeds = [stable_seed(base_seed, "classify", r) for r in range(repeats)]
    run = EvalRun(
        protocol="classification",
        config={"fraction": fraction, "repeats": repeats, "c_grid": list(c_grid),
                "epochs": epochs},
        seeds=seeds,
    )
    for seed in seeds:
        take = subsample_indices(y_train, fraction, seed)
        X_sub, y_sub = X_train[take], [y_train[i] for i in take]
        best_c = tune_C(X_sub, y_sub, grid=c_grid, seed=seed, epochs=epochs)
        model = train_linear(X_sub, y_sub, best_c, seed=stable_seed(seed, "final"),
                             epochs=epochs)
        preds = model.predict(X_test)
        run.per_run.append({
            "accuracy": accuracy(y_test, preds),
            "macro_f1": macro_f1(y_test, preds, labels=model.labels),
            "C": best_c,
            "n_train": len(take),
        })
    return run


def _unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return X / safe


def nearest_prototype_predict(
    X: np.ndarray,
    prototypes: np.ndarray,
    labels: Sequence[str],
    metric: str = "cosine",
) -> list[str]:
    """Label each row by its closest prototype; ties take the smallest label."""
    if metric == "cosine":
        scores = _unit_rows(np.asarray(X, dtype=np.float64)) @ _unit_rows(prototypes).T
    elif metric == "euclidean":
        diffs = X[:, None, :] - prototypes[None, :, :]
        scores = -np.linalg.norm(diffs, axis=2)
    else:
        raise ConfigError(f"unknown few-shot metric {metric!r}")
    return [labels[i] for i in np.argmax(scores, axis=1)]


def few_shot(
    dv_set: DocumentVectorSet,
    corpus: Corpus,
    k_shot: int,
    repeats: int = 5,
    base_seed: int = 0,
    metric: str = "cosine",
) -> EvalRun:
    """K-shot N-way prototypical classification of the test split.

    Prototypes are arithmetic means of k_shot sampled training vectors
    per class; test documents take the label of the nearest prototype.
    """
    train_ids, test_ids, X_train, X_test = _train_test_split(dv_set, corpus)
    y_train = corpus.labels_for(train_ids)
    y_test = corpus.labels_for(test_ids)
    classes = sorted(set(y_train))
    per_class = {lab: [i for i, v in enumerate(y_train) if v == lab] for lab in classes}
    for lab, idx in per_class.items():
        if len(idx) < k_shot:
            raise DataError(f"class {lab!r} has {len(idx)} training examples, "
                            f"fewer than k_shot={k_shot}")
    seeds = [stable_seed(base_seed, "fewshot", k_shot, r) for r in range(repeats)]
    run = EvalRun(
        protocol="few_shot",
        config={"k_shot": k_shot, "repeats": repeats, "metric": metric},
        seeds=seeds,
    )
    for seed in seeds:
        prototypes = []
        for lab in classes:
            idx = np.asarray(per_class[lab])
            rng = np.random.default_rng(stable_seed(seed, lab))
            take = idx[rng.permutation(len(idx))[:k_shot]]
            prototypes.append(X_train[take].mean(axis=0))
        preds = nearest_prototype_predict(X_test, np.asarray(prototypes), classes, metric)
        run.per_run.append({"accuracy": accuracy(y_test, preds)})
    return run


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine of a zero vector is undefined")
    return float(a @ b / (na * nb))


@dataclass
class ConceptMatchResult:
    accuracy: float
    f1: float
    threshold: float
    sweep: list[dict]  # per-threshold {threshold, accuracy, f1}

    def to_dict(self) -> dict:
        return {
            "protocol": "concept_match",
            "accuracy": self.accuracy,
            "f1": self.f1,
            "threshold": self.threshold,
            "sweep": self.sweep,
        }


def concept_match(
    dv_set: DocumentVectorSet,
    pairs: Sequence[tuple[int, int, bool]],
) -> ConceptMatchResult:
    """Cosine-score labeled (concept, project) pairs and sweep the decision
    threshold over {0.00, 0.01, ..., 1.00}, reporting the F1-best one.

    A pair touching a zero document vector scores below every threshold
    (counted as a predicted non-match) with a warning.
    """
    if not pairs:
        raise DataError("no concept/project pairs given")
    scores = np.empty(len(pairs))
    truth = np.empty(len(pairs), dtype=bool)
    for i, (concept_id, project_id, is_match) in enumerate(pairs):
        a, b = dv_set.vector(concept_id), dv_set.vector(project_id)
        try:
            scores[i] = _cosine(a, b)
        except NumericError:
            log.warning("pair (%d, %d) involves a zero document vector; scored as non-match",
                        concept_id, project_id)
            scores[i] = -1.0
        truth[i] = bool(is_match)
    sweep = []
    best = None
    for threshold in np.round(np.arange(0, 101) / 100.0, 2):
        pred = scores >= threshold
        tp = int(np.sum(pred & truth))
        fp = int(np.sum(pred & ~truth))
        fn = int(np.sum(~pred & truth))
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        acc = float(np.mean(pred == truth))
        entry = {"threshold": float(threshold), "accuracy": acc, "f1": f1}
        sweep.append(entry)
        if best is None or f1 > best["f1"]:
            best = entry
    return ConceptMatchResult(
        accuracy=best["accuracy"], f1=best["f1"], threshold=best["threshold"], sweep=sweep
    )


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pearson expects two equal-length 1-d score vectors")
    if len(x) < 2:
        raise DataError("pearson needs at least 2 observations")
    xm = x - x.mean()
    ym = y - y.mean()
    vx = float(xm @ xm)
    vy = float(ym @ ym)
    if vx == 0.0 or vy == 0.0:
        raise NumericError("correlation undefined: a score vector has zero variance")
    return float(xm @ ym / math.sqrt(vx * vy))


@dataclass
class StsPair:
    id_a: int
    id_b: int
    gold: float
    group: str = "all"


@dataclass
class StsResult:
    per_group: dict[str, float]
    average: float
    num_pairs: int

    def to_dict(self) -> dict:
        return {
            "protocol": "sts",
            "per_group": self.per_group,
            "average": self.average,
            "num_pairs": self.num_pairs,
        }


def sts_eval(dv_set: DocumentVectorSet, pairs: Sequence[StsPair]) -> StsResult:
    """Pearson correlation of cosine scores against gold ratings, per group.

    The reported average is the unweighted mean over groups.
    """
    if len(pairs) < 2:
        raise DataError("need at least 2 sentence pairs")
    groups: dict[str, tuple[list[float], list[float]]] = {}
    for p in pairs:
        machine = _sts_machine_score(dv_set, p)
        gold_list, machine_list = groups.setdefault(p.group, ([], []))
        gold_list.append(p.gold)
        machine_list.append(machine)
    per_group = {}
    for group in sorted(groups):
        gold_list, machine_list = groups[group]
        gold_arr = np.asarray(gold_list)
        if np.all(gold_arr == gold_arr[0]):
            raise DataError(f"gold scores in group {group!r} are all equal")
        per_group[group] = pearson(machine_list, gold_list)
    return StsResult(
        per_group=per_group,
        average=float(np.mean(list(per_group.values()))),
        num_pairs=len(pairs),
    )


def _sts_machine_score(dv_set: DocumentVectorSet, pair: StsPair) -> float:
    try:
        return _cosine(dv_set.vector(pair.id_a), dv_set.vector(pair.id_b))
    except NumericError:
        log.warning("pair (%d, %d) involves a zero sentence vector; scoring 0",
                    pair.id_a, pair.id_b)
        return 0.0
