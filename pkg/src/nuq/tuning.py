"""Bandwidth selection by cross-validated classification accuracy.

Stratified k-fold: each fold's held-out points are predicted by the
kernel-weighted class probabilities fitted on the remaining folds, and
the winning bandwidth maximizes the mean fold accuracy (ties go to the
smallest candidate).  Folds always use the exact backend so the sweep is
deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .kernels import KernelSpec
from .knn import ExactIndex, IndexConfig
from .model import EmbeddingDataset, NuqModel

GRID_SUBSAMPLE = 1024


@dataclass(frozen=True)
class TuneConfig:
    grid: tuple[float, ...] | None = None  # None derives the default grid
    folds: int = 5
    neighbors: int = 32
    seed: int = 0
    kernel_kind: str = "gaussian"

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds!r}")
        if self.neighbors < 1:
            raise ConfigError("neighbors must be a positive integer")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.grid is not None:
            grid = tuple(float(h) for h in self.grid)
            if any(h <= 0 for h in grid):
                raise ConfigError("bandwidth grid values must be positive")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError("bandwidth grid must be strictly increasing")
            object.__setattr__(self, "grid", grid)


def median_pairwise_distance(dataset: EmbeddingDataset, seed: int = 0,
                             subsample: int = GRID_SUBSAMPLE) -> float:
    """Median Euclidean distance over a seeded subsample of at most 1024 rows."""
    pts = dataset.points.astype(np.float64)
    n = pts.shape[0]
    if n > subsample:
        rng = np.random.Generator(np.random.Philox(seed))
        pts = pts[np.sort(rng.choice(n, size=subsample, replace=False))]
        n = subsample
    if n < 2:
        return 1.0
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
    upper = d2[np.triu_indices(n, k=1)]
    med = float(np.median(np.sqrt(np.maximum(upper, 0.0))))
    return med if med > 0.0 else 1.0


def default_bandwidth_grid(dataset: EmbeddingDataset, size: int = 20,
                           lo: float = 0.05, hi: float = 5.0,
                           seed: int = 0) -> tuple[float, ...]:
    """Log-spaced candidates anchored to the median pairwise distance."""
    if size < 1:
        raise ConfigError("grid size must be >= 1")
    m = median_pairwise_distance(dataset, seed=seed)
    return tuple(np.geomspace(lo * m, hi * m, size))


def _fold_assignments(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Stratified fold ids: per class, shuffle then deal round-robin.

    The deal continues across classes so singleton classes spread over
    folds instead of piling into fold zero.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    fold = np.empty(labels.shape[0], dtype=np.int64)
    start = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        fold[idx] = (np.arange(idx.shape[0]) + start) % folds
        start = (start + idx.shape[0]) % folds
    return fold


def _fold_models(dataset: EmbeddingDataset, cfg: TuneConfig):
    """Per-fold (train index, train dataset, heldout points, heldout labels)."""
    if dataset.labels is None:
        raise InputError("bandwidth tuning requires a labeled dataset")
    if cfg.folds > dataset.n:
        raise ConfigError(f"folds ({cfg.folds}) cannot exceed the dataset size ({dataset.n})")
    fold = _fold_assignments(dataset.labels, cfg.folds, cfg.seed)
    parts = []
    for f in range(cfg.folds):
        test_mask = fold == f
        if not test_mask.any() or test_mask.all():
            continue
        train = EmbeddingDataset(
            points=dataset.points[~test_mask],
            labels=dataset.labels[~test_mask],
            num_classes=dataset.num_classes,
        )
        parts.append((ExactIndex(train.points), train,
                      dataset.points[test_mask].astype(np.float64),
                      dataset.labels[test_mask]))
    if not parts:
        raise InputError("cross-validation folds are degenerate for this dataset")
    return parts


def _accuracy(parts, bandwidth: float, cfg: TuneConfig) -> float:
    fold_accs = []
    index_cfg = IndexConfig(neighbors=cfg.neighbors, backend="exact")
    for index, train, heldout, heldout_labels in parts:
        kernel = KernelSpec(cfg.kernel_kind, bandwidth, train.dim)
        model = NuqModel(train, kernel, index, index_cfg, density_mode="kde")
        preds = np.array([model.predict(x) for x in heldout])
        fold_accs.append(float(np.mean(preds == heldout_labels)))
    return float(np.mean(fold_accs))


def cv_accuracy(dataset: EmbeddingDataset, bandwidth: float, cfg: TuneConfig) -> float:
    """Mean held-out accuracy of the kernel classifier at one bandwidth."""
    if bandwidth <= 0:
        raise ConfigError("bandwidth must be positive")
    return _accuracy(_fold_models(dataset, cfg), bandwidth, cfg)


def tune_bandwidth(dataset: EmbeddingDataset, cfg: TuneConfig):
    """Sweep the grid and return (best bandwidth, [(h, accuracy), ...]).

    Fold indexes are built once and shared across candidates; ties in
    accuracy resolve toward the smallest bandwidth.
    """
    grid = cfg.grid if cfg.grid is not None else default_bandwidth_grid(dataset, seed=cfg.seed)
    if len(grid) == 0:
        raise InputError("bandwidth grid is empty")
    parts = _fold_models(dataset, cfg)
    table = [(float(h), _accuracy(parts, float(h), cfg)) for h in grid]
    best_acc = max(acc for _, acc in table)
    best_h = next(h for h, acc in table if acc == best_acc)
    return best_h, table
