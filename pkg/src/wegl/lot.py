"""Linear Wasserstein embedding of point clouds against a fixed reference.

Each cloud is coupled to the reference by one exact OT solve; the plan's
barycentric projection approximates the optimal map, and the embedding is
the mass-weighted displacement field of the reference points.  Euclidean
distance between embeddings is a true metric that approximates the
2-Wasserstein distance between the clouds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reference import Reference
from .transport import TransportPlan, solve_ot, squared_cost

__all__ = [
    "GraphEmbedding",
    "barycentric_project",
    "lot_embed",
    "lot_distance",
    "pseudo_invert",
    "embedding_mean",
    "embedding_geodesic",
    "make_ring_dataset",
]


@dataclass(frozen=True)
class GraphEmbedding:
    """Scaled displacement field (N x d) bound to one reference."""

    displacement: np.ndarray
    reference_id: str

    def __post_init__(self):
        disp = np.array(self.displacement, dtype=np.float64, order="C", copy=True)
        if disp.ndim != 2:
            raise ValueError("displacement must be 2-D")
        if not np.isfinite(disp).all():
            raise ValueError("displacement must be finite")
        disp.setflags(write=False)
        object.__setattr__(self, "displacement", disp)

    def flatten(self) -> np.ndarray:
        """Row-major vector view used by downstream classifiers."""
        return self.displacement.ravel()

    def norm(self) -> float:
        return float(np.linalg.norm(self.displacement))


def barycentric_project(plan: TransportPlan | np.ndarray, points: np.ndarray) -> np.ndarray:
    """Per-row conditional barycenters of the target points under the plan.

    Row j of the result is the mass-weighted mean of the target points that
    row j of the coupling sends mass to.  Rows are normalized by their own
    sums, which keeps deterministic (permutation) couplings exact.
    """
    matrix = plan.plan if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if matrix.shape[1] != points.shape[0]:
        raise ValueError("plan columns must match the number of target points")
    row_sums = matrix.sum(axis=1)
    if np.any(row_sums <= 0):
        raise ValueError("every plan row needs positive mass")
    return (matrix / row_sums[:, None]) @ points


def lot_embed(points: np.ndarray, reference: Reference) -> GraphEmbedding:
    """Embed one cloud: solve OT from the reference, project, subtract, scale."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != reference.dim:
        raise ValueError("points must be 2-D and match the reference dimension")
    plan = solve_ot(squared_cost(reference.points, points))
    projected = barycentric_project(plan, points)
    displacement = (projected - reference.points) / np.sqrt(reference.size)
    return GraphEmbedding(displacement=displacement, reference_id=reference.identifier())


def _check_same_reference(a: GraphEmbedding, b: GraphEmbedding) -> None:
    if a.reference_id != b.reference_id:
        raise ValueError("embeddings are bound to different references")


def lot_distance(a: GraphEmbedding, b: GraphEmbedding) -> float:
    """Frobenius distance between embeddings sharing a reference."""
    _check_same_reference(a, b)
    return float(np.linalg.norm(a.displacement - b.displacement))


def pseudo_invert(embedding: GraphEmbedding, reference: Reference) -> np.ndarray:
    """Reconstruct the barycentric surrogate cloud the embedding encodes.

    This recovers the projected cloud, not the original one: barycentric
    projection averages target points, so inversion is only approximate.
    """
    if embedding.reference_id != reference.identifier():
        raise ValueError("embedding is bound to a different reference")
    return np.sqrt(reference.size) * embedding.displacement + reference.points


def embedding_mean(embeddings: list[GraphEmbedding]) -> GraphEmbedding:
    """Entrywise mean embedding (the mean of the displacement fields)."""
    if not embeddings:
        raise ValueError("need at least one embedding")
    for e in embeddings[1:]:
        _check_same_reference(embeddings[0], e)
    mean = np.mean([e.displacement for e in embeddings], axis=0)
    return GraphEmbedding(displacement=mean, reference_id=embeddings[0].reference_id)


def embedding_geodesic(a: GraphEmbedding, b: GraphEmbedding, alpha: float) -> GraphEmbedding:
    """Point at fraction alpha on the straight segment from b to a."""
    _check_same_reference(a, b)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    blended = alpha * a.displacement + (1.0 - alpha) * b.displacement
    return GraphEmbedding(displacement=blended, reference_id=a.reference_id)


def make_ring_dataset(num_clouds: int, noise: float, seed: int,
                      size_range: tuple[int, int] = (50, 100),
                      center_scale: float = 3.0,
                      radius_range: tuple[float, float] = (0.5, 2.0)) -> list[np.ndarray]:
    """Sampled 2-D rings with per-cloud random shift, scale, and size.

    Point radii are r_i * (1 + noise * eta) with standard-normal eta, so
    noise=0 puts every point exactly on its circle.
    """
    if num_clouds < 1:
        raise ValueError("need at least one cloud")
    rng = np.random.default_rng(seed)
    clouds = []
    for _ in range(num_clouds):
        size = int(rng.integers(size_range[0], size_range[1] + 1))
        center = rng.uniform(-center_scale, center_scale, size=2)
        radius = rng.uniform(*radius_range)
        angles = rng.uniform(0.0, 2.0 * np.pi, size=size)
        radii = radius * (1.0 + noise * rng.standard_normal(size))
        clouds.append(center + np.column_stack([radii * np.cos(angles), radii * np.sin(angles)]))
    return clouds
