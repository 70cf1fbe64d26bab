"""Marginal density estimation in embedding space.

Two estimators:

* truncated KDE sharing the regressor's kernel and bandwidth, evaluated
  over the same retrieved neighbor set and divided by N * h^d;
* one maximum-likelihood Gaussian per class, mixed by class frequencies
  (no EM), evaluated through log-space with Cholesky factors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .kernels import WEIGHT_FLOOR, KernelSpec, product_weights

_LOG_2PI = math.log(2.0 * math.pi)


def kde_density(spec: KernelSpec, offsets, n_total: int) -> float:
    """Truncated kernel density (1/(N h^d)) * sum_k W(x_k - x).

    ``offsets`` are the neighbor offset rows x_k - x.  Weights are summed
    in ascending order so the value does not depend on row order.  Zero is
    a legal return when every weight underflows.
    """
    w = product_weights(spec, offsets)
    total = float(np.sort(w).sum())
    return total / (int(n_total) * spec.bandwidth**spec.dim)


def _canonical_rows(rows: np.ndarray) -> np.ndarray:
    # fixed row order so moments do not depend on dataset row order
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def _sample_moments(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = _canonical_rows(rows)
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (rows.shape[0] - 1)
    return mean, cov


@dataclass(frozen=True)
class ClassGaussians:
    """Per-class Gaussian mixture weighted by class frequencies."""

    means: np.ndarray        # (C, d)
    covariances: np.ndarray  # (C, d, d), ridge included
    log_weights: np.ndarray  # (C,)
    ridge: float | None
    chol: np.ndarray         # (C, d, d) lower Cholesky factors
    log_norm: np.ndarray     # (C,) log of the Gaussian normalizing constant

    @property
    def num_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _factor(cov: np.ndarray, ridge: float, dim: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Cholesky with ridge escalation: x10 up to three times, then give up."""
    scale = max(float(np.trace(cov)) / dim, 1.0)
    r = ridge
    for _ in range(4):
        attempt = cov + r * np.eye(dim)
        try:
            return attempt, np.linalg.cholesky(attempt), r
        except np.linalg.LinAlgError:
            r = r * 10.0 if r > 0.0 else np.finfo(np.float64).eps * scale
    raise NumericalError(
        f"class covariance not positive-definite after ridge escalation (last ridge {r:g})"
    )


def fit_class_gaussians(dataset, ridge: float | None = None, diagonal: bool = False) -> ClassGaussians:
    """Fit one Gaussian per class; mixture weights are class frequencies.

    ``ridge`` is added to every covariance diagonal; when None, a
    scale-aware default of 1e-6 * trace(cov)/d is used per class.  A class
    with fewer than two points falls back to the pooled covariance of all
    points and emits a warning.
    """
    if dataset.labels is None:
        raise InputError("class-Gaussian density requires a labeled dataset")
    pts = dataset.points.astype(np.float64)
    labels = dataset.labels
    n, d = pts.shape
    c_total = dataset.num_classes
    pooled_cov = None
    means = np.zeros((c_total, d))
    covs = np.zeros((c_total, d, d))
    chols = np.zeros((c_total, d, d))
    log_norms = np.zeros(c_total)
    counts = np.zeros(c_total)
    for c in range(c_total):
        rows = pts[labels == c]
        counts[c] = rows.shape[0]
        if rows.shape[0] >= 2:
            mean, cov = _sample_moments(rows)
        else:
            warnings.warn(
                f"class {c} has {rows.shape[0]} point(s); using the pooled covariance",
                stacklevel=2,
            )
            if pooled_cov is None:
                _, pooled_cov = _sample_moments(pts) if n >= 2 else (None, np.zeros((d, d)))
            mean = rows[0] if rows.shape[0] == 1 else np.zeros(d)
            cov = pooled_cov
        if diagonal:
            cov = np.diag(np.diag(cov))
        r = ridge if ridge is not None else 1e-6 * float(np.trace(cov)) / d
        cov, chol, _ = _factor(cov, r, d)
        means[c] = mean
        covs[c] = cov
        chols[c] = chol
        log_norms[c] = -0.5 * d * _LOG_2PI - float(np.log(np.diag(chol)).sum())
    if counts.sum() != n:
        raise InputError("labels outside [0, num_classes) encountered")
    with np.errstate(divide="ignore"):
        log_weights = np.log(counts / n)
    return ClassGaussians(
        means=means,
        covariances=covs,
        log_weights=log_weights,
        ridge=ridge,
        chol=chols,
        log_norm=log_norms,
    )


def gmm_log_density(model: ClassGaussians, x) -> float:
    """Log of the mixture density via log-sum-exp over class components."""
    q = np.asarray(x, dtype=np.float64).reshape(-1)
    if q.shape[0] != model.dim:
        raise InputError(f"query has length {q.shape[0]}, density dimension is {model.dim}")
    logs = np.full(model.num_classes, -np.inf)
    for c in range(model.num_classes):
        if not np.isfinite(model.log_weights[c]):
            continue
        z = np.linalg.solve(model.chol[c], q - model.means[c])
        logs[c] = model.log_weights[c] + model.log_norm[c] - 0.5 * float(z @ z)
    top = logs.max()
    if not np.isfinite(top):
        return -math.inf
    return float(top + np.log(np.exp(logs - top).sum()))


def gmm_density(model: ClassGaussians, x) -> float:
    """Mixture density; values below the weight floor map to exactly 0."""
    value = math.exp(gmm_log_density(model, x))
    return value if value >= WEIGHT_FLOOR else 0.0
