"""Gaussian fits of feature matrices and the Frechet distance between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True, eq=False)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_gaussian(features, ridge: float = DEFAULT_RIDGE) -> GaussianStats:
    """Mean and unbiased covariance of the rows of ``features``.

    ``ridge * tr(cov) / c`` is added to the diagonal so the covariance stays
    usable when there are fewer rows than columns.
    """
    values = np.asarray(getattr(features, "values", features), dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"expected an n x c matrix, got shape {values.shape}")
    n, c = values.shape
    if n < 2:
        raise ParameterError(f"need at least 2 samples to fit a Gaussian, got {n}")
    if not np.all(np.isfinite(values)):
        raise ParameterError("feature matrix contains non-finite values")
    mean = values.mean(axis=0)
    centred = values - mean
    cov = centred.T @ centred / (n - 1)
    cov = 0.5 * (cov + cov.T)
    if ridge:
        cov = cov + ridge * (np.trace(cov) / c) * np.eye(c)
    return GaussianStats(mean, cov, n)


def sqrtm_psd(m) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via eigendecomposition.

    Negative eigenvalues from round-off are clamped to zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParameterError("matrix contains non-finite values")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > 1e-8 * scale:
        raise ParameterError("matrix is not symmetric")
    try:
        vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    except np.linalg.LinAlgError as e:
        raise ParameterError(f"eigendecomposition failed: {e}") from e
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return 0.5 * (root + root.T)


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Frechet distance ``|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)``."""
    if a.dim != b.dim:
        raise ShapeError(f"feature dimensions differ: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    cross = sqrtm_psd(0.5 * (inner + inner.T))
    d = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    if -1e-6 <= d < 0:
        d = 0.0
    return d
