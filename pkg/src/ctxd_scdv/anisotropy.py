"""Common-component removal to make the embedding space more uniform.

Embeddings tend to occupy a narrow cone (high mean pairwise cosine).
The transform mean-centers the vectors and removes their projections
onto the top principal directions of the centered data.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

MAGIC = b"ATB1"
_HEADER = struct.Struct("<4sII")


@dataclass
class AnisotropyTransform:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return len(self.mean)


def fit_transform(vectors: np.ndarray, k: int, center: bool = True) -> AnisotropyTransform:
    """Mean plus the top-k right singular directions of the centered matrix.

    Each direction's sign is fixed so its largest-magnitude coordinate
    is positive, making the fit deterministic. k=0 keeps centering only;
    center=False leaves the data uncentered (zero mean stored) and takes
    the top directions of the raw matrix.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-d array of vectors, got shape {X.shape}")
    n, d = X.shape
    if k < 0:
        raise DataError(f"component count must be >= 0, got {k}")
    if k >= d or k >= n:
        raise DataError(f"cannot remove {k} components from {n} vectors of dim {d}")
    mean = X.mean(axis=0) if center else np.zeros(d)
    if k == 0:
        return AnisotropyTransform(mean=mean, components=np.zeros((0, d)))
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return AnisotropyTransform(mean=mean, components=components)


def apply(transform: AnisotropyTransform, vectors: np.ndarray) -> np.ndarray:
    """(x - mu) minus its projection onto every removed direction.

    Accepts a single vector or a stack of them.
    """
    x = np.asarray(vectors, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != transform.dim:
        raise DataError(f"vectors have dim {x.shape[1]}, transform has dim {transform.dim}")
    centered = x - transform.mean
    if transform.k:
        coeffs = centered @ transform.components.T
        centered = centered - coeffs @ transform.components
    return centered[0] if single else centered


def mean_pairwise_cosine(vectors: np.ndarray, sample_size: int = 100_000,
                         seed: int = 0, exhaustive_limit: int = 1_000_000) -> float:
    """Mean cosine over unordered pairs; the usual cone-ness measure.

    Exhaustive when the pair count fits the limit, otherwise a seeded
    pair sample. Zero vectors are skipped with a warning.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-d array of vectors, got shape {X.shape}")
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0.0
    if zero.any():
        log.warning("skipping %d zero vector(s) in pairwise-cosine estimate", int(zero.sum()))
    units = X[~zero] / norms[~zero, None]
    n = len(units)
    if n < 2:
        raise DataError("mean pairwise cosine needs at least 2 nonzero vectors")
    num_pairs = n * (n - 1) // 2
    if num_pairs <= exhaustive_limit:
        total = units.sum(axis=0)
        # sum over ordered pairs of cosines = |sum|^2 - n, halve for unordered
        return float((total @ total - n) / (2 * num_pairs))
    rng = np.random.default_rng(seed)
    acc = 0.0
    got = 0
    while got < sample_size:
        take = sample_size - got
        i = rng.integers(0, n, size=take)
        j = rng.integers(0, n, size=take)
        keep = i != j
        if not keep.any():
            continue
        acc += float(np.sum(units[i[keep]] * units[j[keep]], axis=1).sum())
        got += int(keep.sum())
    return acc / got


def save_transform(transform: AnisotropyTransform, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, transform.k, transform.dim))
        fh.write(transform.mean.astype("<f8").tobytes())
        fh.write(transform.components.astype("<f8").tobytes())


def load_transform(path) -> AnisotropyTransform:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, k, d = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 8 * (d + k * d)
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes for k={k} d={d}, got {len(blob)}")
    mean = np.frombuffer(blob, dtype="<f8", count=d, offset=_HEADER.size).copy()
    comps = np.frombuffer(blob, dtype="<f8", count=k * d,
                          offset=_HEADER.size + 8 * d).reshape(k, d).copy()
    return AnisotropyTransform(mean=mean, components=comps)
