"""Reference support construction: k-means centroids or Gaussian samples.

The reference size follows the floor of the mean cloud size across the
dataset.  k-means runs on a lexicographically sorted copy of its input so
the result is invariant to input row order for a fixed seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .transport import squared_cost

__all__ = ["Reference", "reference_size", "kmeans", "normal_reference"]


@dataclass(frozen=True)
class Reference:
    """Fixed support points anchoring the linear Wasserstein embedding."""

    points: np.ndarray      # (N, d)
    provenance: str         # "kmeans" | "normal"
    seed: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C", copy=True)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("reference needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def identifier(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.provenance.encode())
        digest.update(str(self.seed).encode())
        digest.update(np.ascontiguousarray(self.points).tobytes())
        return digest.hexdigest()[:16]


def reference_size(embeddings: list[np.ndarray]) -> int:
    """Floor of the mean number of rows across clouds, at least 1."""
    if not embeddings:
        raise ValueError("need at least one node embedding")
    sizes = [np.asarray(e).shape[0] for e in embeddings]
    return max(int(np.floor(sum(sizes) / len(sizes))), 1)


def _kmeans_pp_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    closest = squared_cost(points, centroids[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[c] = points[idx]
        closest = np.minimum(closest, squared_cost(points, centroids[c:c + 1])[:, 0])
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 300,
           rel_tol: float = 1e-6) -> np.ndarray:
    """Lloyd iterations from k-means++ seeding; returns exactly k centroids.

    Stops when the relative inertia change drops below rel_tol or after
    max_iter rounds.  Empty clusters are re-seeded to the point currently
    farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("kmeans needs a nonempty 2-D point array")
    if k < 1:
        raise ValueError("k must be >= 1")

    # Sorting first makes the outcome independent of input row order.
    order = np.lexsort(points.T[::-1])
    points = points[order]
    n = len(points)

    rng = np.random.default_rng(seed)
    if k >= n:
        extra = points[rng.integers(n, size=k - n)] if k > n else np.empty((0, points.shape[1]))
        return np.vstack([points, extra])

    centroids = _kmeans_pp_seeds(points, k, rng)
    prev_inertia = np.inf
    for _ in range(max_iter):
        dists = squared_cost(points, centroids)
        labels = dists.argmin(axis=1)
        point_cost = dists[np.arange(n), labels]
        inertia = float(point_cost.sum())
        # Lloyd steps never increase the objective.
        assert inertia <= prev_inertia * (1 + 1e-9) + 1e-12, "k-means inertia increased"

        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            stolen_cost = point_cost.copy()
            for c in empties:
                far = int(stolen_cost.argmax())
                centroids[c] = points[far]
                stolen_cost[far] = -np.inf
            prev_inertia = inertia
            continue

        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        new_centroids = sums / counts[:, None]
        if inertia == 0.0 or abs(prev_inertia - inertia) <= rel_tol * inertia:
            centroids = new_centroids
            break
        centroids = new_centroids
        prev_inertia = inertia
    return centroids


def normal_reference(size: int, dim: int, seed: int) -> Reference:
    """Seeded i.i.d. standard-normal reference points."""
    if size < 1 or dim < 1:
        raise ValueError("size and dim must be >= 1")
    points = np.random.default_rng(seed).standard_normal((size, dim))
    return Reference(points=points, provenance="normal", seed=seed)


def kmeans_reference(embeddings: list[np.ndarray], size: int | None, seed: int) -> Reference:
    """k-means centroids of the pooled node embeddings as the reference."""
    if not embeddings:
        raise ValueError("need at least one node embedding")
    if size is None:
        size = reference_size(embeddings)
    pooled = np.vstack([np.asarray(e, dtype=np.float64) for e in embeddings])
    return Reference(points=kmeans(pooled, size, seed), provenance="kmeans", seed=seed)
