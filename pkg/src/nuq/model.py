"""Fitted model: kernel-weighted class probabilities and the uncertainty split.

For a query x the model retrieves K nearest training points, forms
kernel-weighted label frequencies (the conditional class probabilities),
estimates the marginal density p(x), and reports

    aleatoric   U_a = 1 - max_c prob_c
    epistemic   U_e = 2 * sqrt(2/pi) * tau
    total       U_t = U_a + U_e

where tau^2 = |K|_2^2 * max_c prob_c (1 - prob_c) / (N h^d p(x)) is the
asymptotic standard deviation of the kernel regression estimate.  A query
whose kernel weights all underflow is out of support: probabilities fall
back to uniform and the epistemic term is +inf, so such points order as
maximally uncertain.

Points are stored in float32; all kernel sums accumulate in float64, and
weight sums run in ascending order so results do not depend on the order
of training rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import fit_class_gaussians, gmm_density
from .errors import ConfigError, InputError
from .kernels import KernelSpec, norm_sq, product_weights
from .knn import IndexConfig, build_index

EPISTEMIC_COEF = 2.0 * math.sqrt(2.0 / math.pi)

#: Densities at or below this value are treated as zero.
DENSITY_FLOOR = 1e-300

DENSITY_MODES = ("kde", "gmm")


@dataclass(frozen=True)
class EmbeddingDataset:
    """Labeled point cloud in R^d: float32 rows plus integer labels in [0, C)."""

    points: np.ndarray
    labels: np.ndarray | None
    num_classes: int

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points), dtype=np.float32)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InputError(f"points must form a non-empty (n, d) matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("points must be finite")
        object.__setattr__(self, "points", pts)
        if self.labels is None:
            if self.num_classes != 0:
                raise InputError("unlabeled dataset must carry num_classes == 0")
            return
        lbl = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if lbl.shape[0] != pts.shape[0]:
            raise InputError("labels must match the number of points")
        if self.num_classes < 1:
            raise InputError("labeled dataset needs num_classes >= 1")
        if lbl.min(initial=0) < 0 or (lbl.size and lbl.max() >= self.num_classes):
            raise InputError("labels must lie in [0, num_classes)")
        object.__setattr__(self, "labels", lbl)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def make_dataset(points, labels=None, num_classes: int | None = None) -> EmbeddingDataset:
    """Dataset constructor that infers the class count from the labels."""
    if labels is None:
        return EmbeddingDataset(points=points, labels=None, num_classes=0)
    lbl = np.asarray(labels, dtype=np.int64).reshape(-1)
    if num_classes is None:
        num_classes = int(lbl.max()) + 1 if lbl.size else 1
    return EmbeddingDataset(points=points, labels=lbl, num_classes=num_classes)


@dataclass(frozen=True)
class ClassProbabilities:
    """Normalized kernel-weighted label frequencies plus the raw weight sum."""

    probs: np.ndarray
    weight_sum: float

    @property
    def out_of_support(self) -> bool:
        return self.weight_sum == 0.0


@dataclass(frozen=True)
class UncertaintyReport:
    predicted_class: int
    probs: ClassProbabilities
    aleatoric: float
    epistemic: float
    total: float
    tau: float
    density: float
    out_of_support: bool


class NuqModel:
    """Immutable fitted state; all query methods are read-only."""

    def __init__(self, dataset, kernel, index, index_cfg, density_mode,
                 class_gaussians=None, ridge=None):
        if kernel.dim != dataset.dim:
            raise InputError(f"kernel dimension {kernel.dim} != data dimension {dataset.dim}")
        if density_mode not in DENSITY_MODES:
            raise ConfigError(f"unknown density mode {density_mode!r}")
        if density_mode == "gmm" and class_gaussians is None:
            raise ConfigError("gmm density mode requires fitted class Gaussians")
        self.dataset = dataset
        self.kernel = kernel
        self.index = index
        self.index_cfg = index_cfg
        self.density_mode = density_mode
        self.class_gaussians = class_gaussians
        self.ridge = ridge
        self._points64 = dataset.points.astype(np.float64)
        self._norm_sq = norm_sq(kernel)
        self._nhd = dataset.n * kernel.bandwidth**kernel.dim

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def dim(self) -> int:
        return self.dataset.dim

    @property
    def num_classes(self) -> int:
        return self.dataset.num_classes

    def _query_vector(self, x) -> np.ndarray:
        q = np.asarray(x, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise InputError(f"query has length {q.shape[0]}, model dimension is {self.dim}")
        if not np.all(np.isfinite(q)):
            raise InputError("query vector must be finite")
        return q

    def _neighbor_weights(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = min(self.index_cfg.neighbors, self.n)
        neighbors = self.index.query(q, k)
        offsets = self._points64[neighbors.ids] - q
        return neighbors.ids, product_weights(self.kernel, offsets)

    def _probs_from_weights(self, ids: np.ndarray, weights: np.ndarray) -> ClassProbabilities:
        sums = np.zeros(self.num_classes)
        labels = self.dataset.labels[ids]
        for c in np.unique(labels):
            sums[int(c)] = np.sort(weights[labels == c]).sum()
        weight_sum = float(sums.sum())
        if weight_sum > 0.0:
            probs = sums / weight_sum
        else:
            probs = np.full(self.num_classes, 1.0 / self.num_classes)
        return ClassProbabilities(probs=probs, weight_sum=weight_sum)

    def _density_from_weights(self, q: np.ndarray, weights: np.ndarray) -> float:
        if self.density_mode == "kde":
            return float(np.sort(weights).sum()) / self._nhd
        return gmm_density(self.class_gaussians, q)

    def conditional_probs(self, x) -> ClassProbabilities:
        q = self._query_vector(x)
        ids, weights = self._neighbor_weights(q)
        return self._probs_from_weights(ids, weights)

    def predict(self, x) -> int:
        return int(np.argmax(self.conditional_probs(x).probs))

    def marginal_density(self, x) -> float:
        q = self._query_vector(x)
        if self.density_mode == "gmm":
            return gmm_density(self.class_gaussians, q)
        _, weights = self._neighbor_weights(q)
        return self._density_from_weights(q, weights)

    def tau(self, probs: ClassProbabilities, density: float) -> float:
        """Estimation-noise scale sqrt(|K|_2^2 max_c sigma_c^2 / (N h^d p)).

        Zero whenever every class variance vanishes; +inf when the density
        is at or below the floor while some variance remains.
        """
        p = probs.probs
        sig2 = max(float(np.max(p * (1.0 - p))), 0.0)
        if sig2 == 0.0:
            return 0.0
        if density <= DENSITY_FLOOR:
            return math.inf
        return math.sqrt(self._norm_sq * sig2 / (self._nhd * density))

    def uncertainties(self, x) -> UncertaintyReport:
        q = self._query_vector(x)
        ids, weights = self._neighbor_weights(q)
        cp = self._probs_from_weights(ids, weights)
        density = self._density_from_weights(q, weights)
        out = cp.weight_sum == 0.0
        tau = math.inf if out else self.tau(cp, density)
        aleatoric = float(1.0 - np.max(cp.probs))
        epistemic = EPISTEMIC_COEF * tau
        return UncertaintyReport(
            predicted_class=int(np.argmax(cp.probs)),
            probs=cp,
            aleatoric=aleatoric,
            epistemic=epistemic,
            total=aleatoric + epistemic,
            tau=tau,
            density=density,
            out_of_support=out,
        )

    def score_batch(self, queries) -> list[UncertaintyReport]:
        """Score query rows independently, preserving input order."""
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim != 2:
            raise InputError(f"queries must form an (m, d) matrix, got shape {q.shape}")
        if q.shape[0] and q.shape[1] != self.dim:
            raise InputError(f"queries have dimension {q.shape[1]}, model dimension is {self.dim}")
        return [self.uncertainties(row) for row in q]


def fit(dataset: EmbeddingDataset, kernel: KernelSpec, index_cfg: IndexConfig | None = None,
        density_mode: str = "kde", ridge: float | None = None,
        diagonal: bool = False) -> NuqModel:
    """Build the index (and, for gmm mode, the class Gaussians) and freeze a model."""
    if dataset.labels is None:
        raise InputError("fitting requires a labeled dataset")
    if index_cfg is None:
        index_cfg = IndexConfig()
    if density_mode not in DENSITY_MODES:
        raise ConfigError(f"unknown density mode {density_mode!r}; expected one of {DENSITY_MODES}")
    index = build_index(dataset.points, index_cfg)
    gaussians = None
    if density_mode == "gmm":
        gaussians = fit_class_gaussians(dataset, ridge=ridge, diagonal=diagonal)
    return NuqModel(dataset, kernel, index, index_cfg, density_mode, gaussians, ridge)
