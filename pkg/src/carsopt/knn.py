"""k-nearest-neighbor fitness regression over evaluated samples.

Estimates are unweighted means of the k nearest stored points under Euclidean
distance in unit space; with fewer than k points stored, all of them are used.
This powers the oversampling extension: candidate points are scored here and
only the most promising candidate per row gets an actual evaluation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NeighborStore"]


class NeighborStore:
    """Append-only store of (unit point, scalar fitness) pairs."""

    def __init__(self, n_dim: int):
        self.n_dim = n_dim
        self._points: list[np.ndarray] = []
        self._fitness: list[float] = []
        self._cache: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._fitness)

    def append(self, point, fitness: float) -> None:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.n_dim,):
            raise ValueError(f"point shape {point.shape} != ({self.n_dim},)")
        if np.any(point < 0) or np.any(point > 1):
            raise ValueError("point outside the unit hypercube")
        if not np.isfinite(fitness):
            raise ValueError("fitness must be finite")
        self._points.append(point)
        self._fitness.append(float(fitness))
        self._cache = None

    def extend(self, points, fitnesses) -> None:
        for p, f in zip(points, fitnesses):
            self.append(p, f)

    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._cache is None:
            self._cache = np.asarray(self._points, dtype=float)
        return self._cache, np.asarray(self._fitness, dtype=float)

    def estimate(self, query, k: int) -> float:
        """Mean fitness of the min(k, len(store)) nearest points.

        Distance ties break by insertion order (earlier wins), which a stable
        argsort on squared distances provides.
        """
        if not self._fitness:
            raise ValueError("cannot estimate from an empty store")
        pts, fit = self._arrays()
        d2 = np.sum((pts - np.asarray(query, dtype=float)) ** 2, axis=1)
        k = min(k, len(fit))
        order = np.argsort(d2, kind="stable")[:k]
        return float(fit[order].mean())

    def estimate_many(self, queries: np.ndarray, k: int) -> np.ndarray:
        """Vectorized :meth:`estimate` for an (n, n_dim) query array."""
        if not self._fitness:
            raise ValueError("cannot estimate from an empty store")
        pts, fit = self._arrays()
        queries = np.asarray(queries, dtype=float)
        k = min(k, len(fit))
        # (n, m) squared distances; chunk queries to bound memory.
        out = np.empty(len(queries))
        chunk = max(1, 2_000_000 // max(1, len(fit)))
        for start in range(0, len(queries), chunk):
            q = queries[start : start + chunk]
            d2 = ((q[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start : start + chunk] = fit[order].mean(axis=1)
        return out

    def select_oversampled(self, candidates: np.ndarray, k: int) -> np.ndarray:
        """Pick the best-estimated candidate per row.

        ``candidates`` has shape (n_rows, n_over, n_dim).  Ties (and an empty
        store) resolve to the lowest column index.
        """
        candidates = np.asarray(candidates, dtype=float)
        n_rows, n_over, n_dim = candidates.shape
        if n_over == 1 or not self._fitness:
            return candidates[:, 0, :]
        est = self.estimate_many(candidates.reshape(-1, n_dim), k).reshape(n_rows, n_over)
        best = np.argmax(est, axis=1)  # argmax returns the first maximum
        return candidates[np.arange(n_rows), best, :]
