"""Exact and approximate (HNSW) K-nearest-neighbor retrieval.

Both backends index a fixed matrix of float32 training points under the
Euclidean metric.  Indexes are immutable once built: queries never mutate
shared state, so a built index may be shared across threads.

The exact backend guarantees the true K nearest with ties at equal
distance broken toward the lower row index.  The HNSW backend trades
exactness for sublinear query time via a layered proximity graph; its
construction randomness comes from a seeded counter RNG, so builds are
reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

BACKENDS = ("exact", "hnsw")


@dataclass(frozen=True)
class IndexConfig:
    neighbors: int = 32
    backend: str = "exact"
    hnsw_m: int = 16
    hnsw_ef_construction: int = 200
    hnsw_ef_search: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown knn backend {self.backend!r}; expected one of {BACKENDS}")
        for name in ("neighbors", "hnsw_m", "hnsw_ef_construction", "hnsw_ef_search"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"knn config field {name} must be a positive integer")
        if self.seed < 0:
            raise ConfigError("knn seed must be nonnegative")
        # searches never use a beam narrower than the neighbor count
        if self.hnsw_ef_search < self.neighbors:
            object.__setattr__(self, "hnsw_ef_search", self.neighbors)


@dataclass(frozen=True)
class NeighborSet:
    """Distinct training-row ids with ascending Euclidean distances."""

    ids: np.ndarray
    distances: np.ndarray


def _check_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float32)
    if pts.ndim != 2:
        raise InputError(f"points must form an (n, d) matrix, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise InputError("cannot build an index over an empty dataset")
    if not np.all(np.isfinite(pts)):
        raise InputError("points must be finite")
    return pts


def _check_query(x, dim: int) -> np.ndarray:
    q = np.asarray(x, dtype=np.float64).reshape(-1)
    if q.shape[0] != dim:
        raise InputError(f"query has length {q.shape[0]}, index dimension is {dim}")
    if not np.all(np.isfinite(q)):
        raise InputError("query vector must be finite")
    return q


class ExactIndex:
    """Brute-force index: exact K nearest under Euclidean distance."""

    backend = "exact"

    def __init__(self, points):
        self._points = _check_points(points)
        self._points64 = self._points.astype(np.float64)

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def query(self, x, k: int) -> NeighborSet:
        q = _check_query(x, self.dim)
        if int(k) < 1:
            raise InputError("k must be >= 1")
        diffs = self._points64 - q
        d2 = np.einsum("ij,ij->i", diffs, diffs)
        k = min(int(k), self.n)
        if k == self.n:
            ids = np.argsort(d2, kind="stable")
        else:
            # argpartition alone may drop the lower-index member of a tie at
            # the k-th boundary; re-rank every candidate within the threshold.
            part = np.argpartition(d2, k - 1)[:k]
            thr = d2[part].max()
            cand = np.flatnonzero(d2 <= thr)
            ids = cand[np.argsort(d2[cand], kind="stable")][:k]
        return NeighborSet(ids=ids, distances=np.sqrt(d2[ids]))


class HnswIndex:
    """Layered small-world graph for approximate nearest-neighbor search."""

    backend = "hnsw"

    def __init__(self, points, cfg: IndexConfig):
        self._points = _check_points(points)
        self._points64 = self._points.astype(np.float64)
        self._m = int(cfg.hnsw_m)
        self._m0 = 2 * self._m
        self._ef_construction = int(cfg.hnsw_ef_construction)
        self._ef_search = int(cfg.hnsw_ef_search)
        n = self.n
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        mult = 1.0 / math.log(self._m)
        draws = rng.random(n)
        levels = np.floor(-np.log(np.clip(draws, 1e-300, None)) * mult).astype(np.int64)
        self._levels = np.minimum(levels, 48)
        self._max_level = int(self._levels[0])
        self._entry = 0
        # layer 0 holds every node; upper layers are sparse dicts
        self._links0: list[list[int]] = [[] for _ in range(n)]
        self._links_up: list[dict[int, list[int]]] = [
            {} for _ in range(int(self._levels.max()))
        ]
        self._build()

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def _neighbors(self, layer: int, node: int) -> list[int]:
        if layer == 0:
            return self._links0[node]
        return self._links_up[layer - 1].get(node, [])

    def _set_neighbors(self, layer: int, node: int, ids: list[int]) -> None:
        if layer == 0:
            self._links0[node] = ids
        else:
            self._links_up[layer - 1][node] = ids

    def _d2_many(self, ids, q32) -> np.ndarray:
        diffs = self._points[ids] - q32
        return np.einsum("ij,ij->i", diffs, diffs, dtype=np.float32)

    def _d2_one(self, i: int, q32) -> float:
        diff = self._points[i] - q32
        return float(diff @ diff)

    def _greedy(self, q32, start: int, layer: int) -> int:
        cur = start
        cur_d = self._d2_one(cur, q32)
        while True:
            neigh = self._neighbors(layer, cur)
            if not neigh:
                return cur
            d = self._d2_many(neigh, q32)
            j = int(np.argmin(d))
            if d[j] < cur_d:
                cur = neigh[j]
                cur_d = float(d[j])
            else:
                return cur

    def _search_layer(self, q32, entries, ef: int, layer: int) -> list[tuple[float, int]]:
        """Best-first beam search; returns up to ef (d2, id) pairs sorted by d2."""
        visited = np.zeros(self.n, dtype=bool)
        candidates: list[tuple[float, int]] = []
        results: list[tuple[float, int]] = []  # max-heap via negated distance
        for e in entries:
            if visited[e]:
                continue
            visited[e] = True
            d = self._d2_one(e, q32)
            heapq.heappush(candidates, (d, e))
            heapq.heappush(results, (-d, e))
        while candidates:
            d, c = heapq.heappop(candidates)
            if d > -results[0][0] and len(results) >= ef:
                break
            fresh = [j for j in self._neighbors(layer, c) if not visited[j]]
            if not fresh:
                continue
            visited[fresh] = True
            dists = self._d2_many(fresh, q32)
            bound = -results[0][0]
            for dj, j in zip(dists.tolist(), fresh):
                if len(results) < ef or dj < bound:
                    heapq.heappush(candidates, (dj, j))
                    heapq.heappush(results, (-dj, j))
                    if len(results) > ef:
                        heapq.heappop(results)
                    bound = -results[0][0]
        out = [(-nd, j) for nd, j in results]
        out.sort()
        return out

    def _shrink(self, layer: int, node: int, limit: int) -> None:
        ids = self._neighbors(layer, node)
        if len(ids) <= limit:
            return
        d = self._d2_many(ids, self._points[node])
        order = np.argsort(d, kind="stable")[:limit]
        self._set_neighbors(layer, node, [ids[int(o)] for o in order])

    def _build(self) -> None:
        for i in range(1, self.n):
            q32 = self._points[i]
            level = int(self._levels[i])
            ep = self._entry
            for layer in range(self._max_level, level, -1):
                ep = self._greedy(q32, ep, layer)
            entries = [ep]
            for layer in range(min(level, self._max_level), -1, -1):
                found = self._search_layer(q32, entries, self._ef_construction, layer)
                limit = self._m0 if layer == 0 else self._m
                selected = [j for _, j in found[: self._m]]
                self._set_neighbors(layer, i, selected)
                for j in selected:
                    back = self._neighbors(layer, j)
                    back.append(i)
                    self._set_neighbors(layer, j, back)
                    if len(back) > limit:
                        self._shrink(layer, j, limit)
                entries = [j for _, j in found]
            if level > self._max_level:
                self._max_level = level
                self._entry = i

    def query(self, x, k: int) -> NeighborSet:
        q = _check_query(x, self.dim)
        if int(k) < 1:
            raise InputError("k must be >= 1")
        k = min(int(k), self.n)
        q32 = q.astype(np.float32)
        ep = self._entry
        for layer in range(self._max_level, 0, -1):
            ep = self._greedy(q32, ep, layer)
        found = self._search_layer(q32, [ep], max(self._ef_search, k), 0)
        ids = [j for _, j in found]
        if len(ids) < k:
            # disconnected fragments on tiny graphs: fall back to brute force
            diffs = self._points64 - q
            d2 = np.einsum("ij,ij->i", diffs, diffs)
            ids = list(np.argsort(d2, kind="stable")[:k])
        ids = np.asarray(ids, dtype=np.int64)
        # re-rank the shortlist with float64 distances and the exact tie rule
        diffs = self._points64[ids] - q
        d2 = np.einsum("ij,ij->i", diffs, diffs)
        order = np.lexsort((ids, d2))[:k]
        ids = ids[order]
        return NeighborSet(ids=ids, distances=np.sqrt(d2[order]))


def build_index(points, cfg: IndexConfig):
    """Build the configured index over an (n, d) float32 point matrix."""
    if cfg.backend == "exact":
        return ExactIndex(points)
    return HnswIndex(points, cfg)
