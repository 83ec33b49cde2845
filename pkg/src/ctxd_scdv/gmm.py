"""Gaussian mixture with one tied covariance shared by all components.

EM in log space: the E-step evaluates shared-covariance Gaussian
densities through the Cholesky factor of the tied covariance, the
M-step pools the within-component scatter of every component into a
single covariance update. Means initialize from k-means++ picks,
weights start uniform, and the covariance starts at the global sample
covariance; a small diagonal ridge keeps the factorization well posed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import ConfigError, DataError, NumericError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GmmConfig:
    max_iters: int = 200
    tol: float = 1e-5  # on the improvement of mean log-likelihood
    eps: float = 1e-6  # diagonal ridge added to the tied covariance
    covariance_type: str = "full"  # "diag" restricts the tied covariance to its diagonal

    def __post_init__(self):
        if self.covariance_type not in ("full", "diag"):
            raise ConfigError(f"covariance_type must be 'full' or 'diag', "
                              f"got {self.covariance_type!r}")


@dataclass
class GmmModel:
    means: np.ndarray  # (K, d)
    chol: np.ndarray  # (d, d) lower Cholesky factor of the tied covariance
    weights: np.ndarray  # (K,) mixing proportions, sum to 1
    log_likelihood_trace: list[float] = field(default_factory=list)
    n_iters: int = 0

    @property
    def num_components(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def covariance(self) -> np.ndarray:
        return self.chol @ self.chol.T


def _chol_or_raise(cov: np.ndarray, eps: float) -> np.ndarray:
    cov = (cov + cov.T) / 2.0
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NumericError(
            f"tied covariance is numerically singular even with eps={eps}; "
            "increase the covariance ridge"
        ) from None


def _log_gaussians(X: np.ndarray, means: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """log N(x; mu_o, Sigma) for every point and component, shape (n, K).

    The whitening solve is shared across components: with A = L^-1 X^T
    and B = L^-1 M^T, the quadratic form is ||A_i - B_o||^2, so one
    triangular solve of the data covers every component.
    """
    n, d = X.shape
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    a = linalg.solve_triangular(chol, X.T, lower=True)  # (d, n)
    b = linalg.solve_triangular(chol, means.T, lower=True)  # (d, K)
    quad = (np.sum(a * a, axis=0)[:, None]
            - 2.0 * (a.T @ b)
            + np.sum(b * b, axis=0)[None, :])
    np.maximum(quad, 0.0, out=quad)  # a squared norm; clamp float cancellation
    return -0.5 * (d * _LOG_2PI + log_det + quad)


def _log_posteriors(X: np.ndarray, model: GmmModel) -> tuple[np.ndarray, float]:
    """Log responsibilities (max-subtracted) and the mean log-likelihood."""
    joint = _log_gaussians(X, model.means, model.chol) + np.log(model.weights)
    m = joint.max(axis=1, keepdims=True)
    log_norm = m[:, 0] + np.log(np.exp(joint - m).sum(axis=1))
    return joint - log_norm[:, None], float(log_norm.mean())


def _kmeanspp_means(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = rng.integers(len(X))
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            chosen[j] = rng.integers(len(X))
        else:
            chosen[j] = rng.choice(len(X), p=d2 / total)
        np.minimum(d2, np.sum((X - X[chosen[j]]) ** 2, axis=1), out=d2)
    return X[chosen].copy()


def fit_gmm(vectors: np.ndarray, num_components: int, seed: int,
            config: GmmConfig = GmmConfig()) -> GmmModel:
    """Fit by EM until the mean log-likelihood improves by less than tol.

    The per-iteration log-likelihood trace is kept on the model; it is
    non-decreasing (up to ~1e-8 of ridge-induced slack), which tests
    assert directly.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-d array of vectors, got shape {X.shape}")
    n, d = X.shape
    if num_components < 1:
        raise DataError(f"number of components must be >= 1, got {num_components}")
    if num_components > n:
        raise DataError(f"cannot fit {num_components} components to {n} vectors")
    if not np.all(np.isfinite(X)):
        raise DataError("input vectors contain non-finite values")

    rng = np.random.default_rng(seed)
    diag_only = config.covariance_type == "diag"
    ridge = config.eps * np.eye(d)
    means = _kmeanspp_means(X, num_components, rng)
    weights = np.full(num_components, 1.0 / num_components)
    cov = np.cov(X, rowvar=False, ddof=0).reshape(d, d) + ridge
    if diag_only:
        cov = np.diag(np.diag(cov))
    model = GmmModel(means=means, chol=_chol_or_raise(cov, config.eps), weights=weights)

    prev_ll: float | None = None
    for it in range(1, config.max_iters + 1):
        log_resp, ll = _log_posteriors(X, model)
        model.log_likelihood_trace.append(ll)
        model.n_iters = it
        if prev_ll is not None and ll - prev_ll < config.tol:
            break
        prev_ll = ll

        resp = np.exp(log_resp)  # (n, K)
        nk = resp.sum(axis=0) + 10.0 * np.finfo(np.float64).eps
        model.weights = nk / nk.sum()
        model.means = (resp.T @ X) / nk[:, None]
        if diag_only:
            # pooled per-dimension variance only
            var = (np.sum(X * X, axis=0) - nk @ (model.means**2)) / n + config.eps
            cov = np.diag(var)
        else:
            # pooled within-component scatter: (X'X - sum_o nk_o mu_o mu_o') / n
            cov = (X.T @ X - (model.means * nk[:, None]).T @ model.means) / n + ridge
        model.chol = _chol_or_raise(cov, config.eps)
    return model


def posterior(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """P(c_o | x) for a single point; rows of posterior_matrix for many."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DataError(f"query has shape {x.shape}, model dimension is {model.dim}")
    return posterior_matrix(model, x[None, :])[0]


def posterior_matrix(model: GmmModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DataError(f"queries have shape {X.shape}, model dimension is {model.dim}")
    log_resp, _ = _log_posteriors(X, model)
    resp = np.exp(log_resp)
    return resp / resp.sum(axis=1, keepdims=True)


_GMM_HEADER = struct.Struct("<II")


def save_gmm(model: GmmModel, path) -> None:
    """Binary blob: u32 K, u32 d, then means, Cholesky factor, weights (f64 LE)."""
    with open(path, "wb") as fh:
        fh.write(_GMM_HEADER.pack(model.num_components, model.dim))
        fh.write(model.means.astype("<f8").tobytes())
        fh.write(model.chol.astype("<f8").tobytes())
        fh.write(model.weights.astype("<f8").tobytes())


def load_gmm(path) -> GmmModel:
    blob = Path(path).read_bytes()
    if len(blob) < _GMM_HEADER.size:
        raise DataError(f"{path}: truncated mixture-model header")
    k, d = _GMM_HEADER.unpack_from(blob, 0)
    expected = _GMM_HEADER.size + 8 * (k * d + d * d + k)
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes for K={k} d={d}, got {len(blob)}")
    offset = _GMM_HEADER.size
    means = np.frombuffer(blob, dtype="<f8", count=k * d, offset=offset).reshape(k, d).copy()
    offset += 8 * k * d
    chol = np.frombuffer(blob, dtype="<f8", count=d * d, offset=offset).reshape(d, d).copy()
    offset += 8 * d * d
    weights = np.frombuffer(blob, dtype="<f8", count=k, offset=offset).copy()
    return GmmModel(means=means, chol=chol, weights=weights)
