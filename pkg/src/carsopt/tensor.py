"""Sub-domain fitness tensor.

The unit hypercube is split into ``n_sub`` equal intervals per dimension,
giving ``n_sub ** n_dim`` cells.  Cells start at an optimistic 0.75 so
unexplored regions stay attractive; the first real observation overwrites the
prior and later observations keep the per-cell maximum.  Sampling
probabilities come from a numerically stable weighted softmax, optionally on
top of a block-max pooling overlay that spreads fitness to neighbouring cells.

Cells are stored as float32 (a 9-dim tensor with 9 sub-domains each is ~1.5 GB)
while all probability accumulation runs in float64.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SubdomainTensor", "TensorError", "DEFAULT_CELL_CAP", "OPTIMISTIC_INIT"]

DEFAULT_CELL_CAP = 500_000_000
OPTIMISTIC_INIT = 0.75


class TensorError(ValueError):
    """Invalid tensor construction or update."""


class SubdomainTensor:
    """Dense per-cell fitness over the discretized unit hypercube."""

    def __init__(self, n_dim: int, n_sub: int, cell_cap: int = DEFAULT_CELL_CAP):
        if n_dim < 1 or n_sub < 2:
            raise TensorError("need n_dim >= 1 and n_sub >= 2")
        n_cells = n_sub**n_dim
        if n_cells > cell_cap:
            raise TensorError(
                f"{n_sub}^{n_dim} = {n_cells} cells exceeds the cell cap ({cell_cap}); "
                "reduce n_sub or raise the cap"
            )
        self.n_dim = n_dim
        self.n_sub = n_sub
        self.n_cells = n_cells
        self.cells = np.full(n_cells, OPTIMISTIC_INIT, dtype=np.float32)
        self.touched = np.zeros(n_cells, dtype=bool)
        self._updates_started = False

    # -- indexing -----------------------------------------------------------

    def flat_index(self, mi) -> int:
        """Row-major flat index of a multi-index."""
        mi = np.asarray(mi)
        if mi.shape[-1] != self.n_dim:
            raise TensorError(f"multi-index length {mi.shape[-1]} != n_dim {self.n_dim}")
        if np.any(mi < 0) or np.any(mi >= self.n_sub):
            raise TensorError("multi-index coordinate out of range")
        return int(np.ravel_multi_index(tuple(mi), (self.n_sub,) * self.n_dim))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        """Inverse of :meth:`flat_index`."""
        if not 0 <= flat < self.n_cells:
            raise TensorError(f"flat index {flat} out of range")
        return tuple(int(c) for c in np.unravel_index(flat, (self.n_sub,) * self.n_dim))

    def flat_indices(self, mis: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`flat_index` for an (n, n_dim) array."""
        mis = np.asarray(mis)
        if np.any(mis < 0) or np.any(mis >= self.n_sub):
            raise TensorError("multi-index coordinate out of range")
        return np.ravel_multi_index(tuple(mis.T), (self.n_sub,) * self.n_dim)

    def multi_indices(self, flats: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`multi_index`; returns an (n, n_dim) array."""
        return np.stack(np.unravel_index(np.asarray(flats), (self.n_sub,) * self.n_dim), axis=-1)

    # -- updates ------------------------------------------------------------

    def seed_prior(self, prior: np.ndarray) -> None:
        """Replace the uniform optimistic prior with externally supplied values.

        Must happen before any fitness update; seeded cells still count as
        untouched, so the first observation overwrites them.
        """
        if self._updates_started:
            raise TensorError("seed_prior must be called before any fitness update")
        prior = np.asarray(prior, dtype=np.float32).reshape(-1)
        if prior.shape[0] != self.n_cells:
            raise TensorError(f"prior length {prior.shape[0]} != {self.n_cells} cells")
        if not np.all(np.isfinite(prior)):
            raise TensorError("prior contains non-finite values")
        self.cells = prior.copy()

    def update_fitness(self, mi, f: float) -> None:
        """Assign an observed fitness to one cell (max with prior observations)."""
        if np.isnan(f):
            raise TensorError("fitness is NaN")
        flat = self.flat_index(mi)
        self._updates_started = True
        if self.touched[flat]:
            self.cells[flat] = max(self.cells[flat], np.float32(f))
        else:
            self.cells[flat] = np.float32(f)
            self.touched[flat] = True

    def update_many(self, mis: np.ndarray, fs: np.ndarray) -> None:
        """Batch fitness assignment; duplicate cells within a batch keep the max."""
        fs = np.asarray(fs, dtype=np.float32)
        if np.any(np.isnan(fs)):
            raise TensorError("fitness contains NaN")
        flats = self.flat_indices(np.asarray(mis))
        self._updates_started = True
        # Erase untouched priors first so the first observation replaces 0.75.
        fresh = ~self.touched[flats]
        self.cells[flats[fresh]] = -np.inf
        np.maximum.at(self.cells, flats, fs)
        self.touched[flats] = True

    # -- pooling ------------------------------------------------------------

    def max_pool(self, n_pool: int) -> np.ndarray:
        """Block-max overlay: combine ``n_pool`` adjacent cells per dimension.

        Returns the pooled tensor of (n_sub/n_pool)^n_dim values.
        """
        if n_pool < 1 or self.n_sub % n_pool != 0:
            raise TensorError(f"n_pool {n_pool} must divide n_sub {self.n_sub}")
        blocks = self.n_sub // n_pool
        shape = sum(((blocks, n_pool),) * self.n_dim, ())
        pooled = self.cells.reshape(shape)
        for axis in range(self.n_dim):
            pooled = pooled.max(axis=axis + 1)
        return pooled.reshape(-1)

    def effective_cells(self, n_pool: int | None) -> np.ndarray:
        """Cells plus the broadcast pooling overlay (or plain cells if off)."""
        if not n_pool:
            return self.cells
        blocks = self.n_sub // n_pool
        pooled = self.max_pool(n_pool).reshape((blocks,) * self.n_dim)
        for axis in range(self.n_dim):
            pooled = pooled.repeat(n_pool, axis=axis)
        return self.cells + pooled.reshape(-1)

    # -- sampling -----------------------------------------------------------

    def softmax_probabilities(self, alpha: float, n_pool: int | None = None) -> np.ndarray:
        """Sampling probability per cell: softmax of (effective fitness * alpha).

        alpha = 0 is exactly uniform; the exponent maximum is subtracted for
        stability and the normalizing sum accumulates in float64.
        """
        if alpha < 0:
            raise TensorError("softmax weighting alpha must be >= 0")
        if alpha == 0:
            return np.full(self.n_cells, 1.0 / self.n_cells)
        eff = self.effective_cells(n_pool).astype(np.float64)
        if not np.all(np.isfinite(eff)):
            raise TensorError("tensor contains non-finite cells")
        z = eff * alpha
        z -= z.max()
        e = np.exp(z)
        return e / e.sum(dtype=np.float64)

    def sample_subdomains(self, probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` cells i.i.d. with replacement; returns (n, n_dim) multi-indices."""
        cdf = np.cumsum(probs, dtype=np.float64)
        cdf /= cdf[-1]
        flats = np.searchsorted(cdf, rng.random(n), side="right")
        np.clip(flats, 0, self.n_cells - 1, out=flats)
        return self.multi_indices(flats)

    # -- persistence --------------------------------------------------------

    def touched_items(self) -> list[tuple[int, float]]:
        """(flat index, fitness) for every observed cell, ascending by index."""
        idx = np.flatnonzero(self.touched)
        return [(int(i), float(self.cells[i])) for i in idx]
