"""End-to-end graph embedding: diffuse, standardize, reference, transport.

Order of operations per dataset: diffusion node embeddings -> per-node layer
pooling -> standardization (pooled statistics) -> optional PCA -> reference
construction -> one exact OT solve per graph -> flattened fixed-size vectors.
Standardization and PCA statistics are computed over the whole dataset by
default (transductive); pass fit_indices to restrict every fitted statistic
(standardization, PCA, k-means reference) to a training subset.
"""

from __future__ import annotations

import hashlib
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import transport
from .diffusion import DiffusionConfig, node_embedding
from .graphs import (
    Graph, GraphDataset, add_virtual_node, dataset_max_degree,
    degree_features, one_hot_edge_features,
)
from .lot import lot_embed
from .reference import Reference, kmeans, normal_reference, reference_size
from .storage import save_matrix, load_matrix, write_csv

__all__ = [
    "PipelineConfig",
    "EmbeddedDataset",
    "standardize",
    "apply_standardization",
    "PcaBasis",
    "pca",
    "wegl_embed",
    "knn_cross_validate",
    "knn_cv_details",
    "roc_auc",
    "complexity_probe",
    "export_embedded",
    "import_embedded",
    "export_csv",
]

REFERENCE_SOURCES = ("kmeans_all", "kmeans_train", "normal")
DEGREE_MODES = ("auto", "none", "scalar", "one_hot")


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the embedding pipeline; serializable to/from JSON."""

    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    reference_source: str = "kmeans_all"
    pca_dims: int | None = None
    virtual_node: bool = False
    degree_feature_mode: str = "auto"
    degree_clip: int | None = None
    seed: int = 0
    knn_k: int = 5
    cv_folds: int = 10

    def __post_init__(self):
        if self.reference_source not in REFERENCE_SOURCES:
            raise ValueError(f"reference_source must be one of {REFERENCE_SOURCES}")
        if self.degree_feature_mode not in DEGREE_MODES:
            raise ValueError(f"degree_feature_mode must be one of {DEGREE_MODES}")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.pca_dims is not None and self.pca_dims < 1:
            raise ValueError("pca_dims must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diffusion"] = asdict(self.diffusion)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__}
        for key in data:
            if key not in known:
                raise ValueError(f"unknown config key: {key!r}")
        if "diffusion" in data and isinstance(data["diffusion"], dict):
            dk = set(data["diffusion"])
            allowed = set(DiffusionConfig.__dataclass_fields__)
            for key in dk - allowed:
                raise ValueError(f"unknown config key: diffusion.{key!r}")
            data["diffusion"] = DiffusionConfig(**data["diffusion"])
        return cls(**data)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(canonical).hexdigest()


@dataclass
class EmbeddedDataset:
    """Fixed-size vectors for a dataset plus everything needed to reuse them."""

    vectors: np.ndarray             # (M, N*d) row-major flattened embeddings
    labels: np.ndarray | None       # (M,) int labels or None
    reference: Reference
    config_digest: str
    embedding_shape: tuple[int, int]
    ot_solve_count: int = 0
    name: str = ""
    num_classes: int = 0

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if self.labels is not None and len(self.labels) != len(self.vectors):
            raise ValueError("labels length must match vector count")


# ---------------------------------------------------------------------------
# Feature space normalization


def standardize(embeddings: list[np.ndarray],
                stats_indices: list[int] | None = None):
    """Center/scale per coordinate using statistics pooled over all nodes.

    Coordinates whose pooled standard deviation is below 1e-12 are centered
    but not scaled.  Returns (standardized list, mean, std-with-guards).
    """
    if not embeddings:
        raise ValueError("need at least one node embedding")
    fit = embeddings if stats_indices is None else [embeddings[i] for i in stats_indices]
    pooled = np.vstack([np.asarray(e, dtype=np.float64) for e in fit])
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return [(np.asarray(e, dtype=np.float64) - mean) / std for e in embeddings], mean, std


def apply_standardization(embeddings: list[np.ndarray], mean: np.ndarray,
                          std: np.ndarray) -> list[np.ndarray]:
    return [(np.asarray(e, dtype=np.float64) - mean) / std for e in embeddings]


@dataclass(frozen=True)
class PcaBasis:
    """Centered orthonormal projection basis, eigenvalues descending."""

    mean: np.ndarray         # (d,)
    components: np.ndarray   # (dims, d)
    eigenvalues: np.ndarray  # (dims,)

    def transform(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.mean) @ self.components.T


def pca(vectors: np.ndarray, dims: int) -> tuple[np.ndarray, PcaBasis]:
    """Project onto the top eigenvectors of the pooled covariance.

    Sign convention: the largest-magnitude coordinate of each component is
    made positive, so the basis is reproducible across runs.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError("pca expects a 2-D matrix")
    d = vectors.shape[1]
    if dims > d:
        raise ValueError(f"pca_dims {dims} exceeds dimension {d}")
    mean = vectors.mean(axis=0)
    centered = vectors - mean
    cov = centered.T @ centered / len(vectors)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:dims]
    components = eigvecs[:, order].T
    eigvals = eigvals[order]
    flips = np.sign(components[np.arange(dims), np.abs(components).argmax(axis=1)])
    flips[flips == 0] = 1.0
    components = components * flips[:, None]
    return centered @ components.T, PcaBasis(mean=mean, components=components, eigenvalues=eigvals)


# ---------------------------------------------------------------------------
# Initial features and node embeddings


def _prepare_graphs(dataset: GraphDataset, config: PipelineConfig) -> list[Graph]:
    graphs = list(dataset.graphs)

    mode = config.degree_feature_mode
    if mode == "auto":
        if dataset.node_feature_dim == 0:
            mode = "scalar" if config.diffusion.pooling == "concat" else "one_hot"
        else:
            mode = "none"
    if mode != "none":
        max_degree = dataset_max_degree(dataset, config.degree_clip)
        graphs = [
            degree_features(g, mode, clip=config.degree_clip, max_degree=max_degree)
            for g in graphs
        ]
    elif dataset.node_feature_dim == 0:
        raise ValueError("graphs have no node features and degree features are disabled")

    if any(g.edge_labels is not None for g in graphs):
        if not all(g.edge_labels is not None for g in graphs):
            raise ValueError("either all graphs carry edge labels or none")
        stacked = np.vstack([g.edge_labels.reshape(g.num_edges, -1) for g in graphs if g.num_edges])
        num_categories = [int(stacked[:, c].max()) + 1 for c in range(stacked.shape[1])]
        graphs = [one_hot_edge_features(g, num_categories) for g in graphs]

    if config.virtual_node:
        graphs = [add_virtual_node(g) for g in graphs]
    return graphs


def _build_reference(node_embeddings: list[np.ndarray], config: PipelineConfig,
                     fit_indices: list[int] | None) -> Reference:
    source = config.reference_source
    if source == "kmeans_train" and fit_indices is not None:
        fit = [node_embeddings[i] for i in fit_indices]
    else:
        fit = node_embeddings
    size = reference_size(fit)
    dim = fit[0].shape[1]
    if source == "normal":
        return normal_reference(size, dim, config.seed)
    pooled = np.vstack(fit)
    return Reference(points=kmeans(pooled, size, config.seed), provenance="kmeans", seed=config.seed)


def wegl_embed(dataset: GraphDataset, config: PipelineConfig,
               fit_indices: list[int] | None = None,
               threads: int = 1) -> EmbeddedDataset:
    """Embed every graph of a dataset into one fixed-size vector.

    Performs exactly one exact OT solve per graph; the count is recorded on
    the result.  Identical config and seed give bit-identical output
    regardless of the thread count.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    graphs = _prepare_graphs(dataset, config)
    raw = [node_embedding(g, config.diffusion) for g in graphs]
    standardized, _, _ = standardize(raw, stats_indices=fit_indices)

    if config.pca_dims is not None:
        fit = standardized if fit_indices is None else [standardized[i] for i in fit_indices]
        _, basis = pca(np.vstack(fit), config.pca_dims)
        standardized = [basis.transform(e) for e in standardized]

    reference = _build_reference(standardized, config, fit_indices)

    solves_before = transport.solve_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            embeddings = list(pool.map(lambda e: lot_embed(e, reference), standardized))
    else:
        embeddings = [lot_embed(e, reference) for e in standardized]
    solve_delta = transport.solve_count() - solves_before

    vectors = np.vstack([e.flatten() for e in embeddings])
    return EmbeddedDataset(
        vectors=vectors,
        labels=dataset.labels,
        reference=reference,
        config_digest=config.digest(),
        embedding_shape=(reference.size, reference.dim),
        ot_solve_count=solve_delta,
        name=dataset.name,
        num_classes=dataset.num_classes,
    )


# ---------------------------------------------------------------------------
# Built-in evaluation


def _stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold id per sample; stratified unless some class is smaller than folds."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=np.int64)
    counts = np.bincount(labels)
    if counts.min() < folds:
        warnings.warn("a class has fewer members than folds; using non-stratified folds")
        order = rng.permutation(len(labels))
        assignment[order] = np.arange(len(labels)) % folds
        return assignment
    for cls in range(len(counts)):
        members = np.flatnonzero(labels == cls)
        members = rng.permutation(members)
        assignment[members] = np.arange(len(members)) % folds
    return assignment


def _knn_predict(train_x, train_y, test_x, k, num_classes):
    """Labels and positive-class vote fractions for each test row.

    Distance ties resolve to the lower train index (stable sort); vote ties
    resolve to the lower class id (argmax convention).
    """
    dists = transport.squared_cost(test_x, train_x)
    preds = np.empty(len(test_x), dtype=np.int64)
    pos_fraction = np.empty(len(test_x))
    kk = min(k, len(train_x))
    for t in range(len(test_x)):
        neighbors = np.argsort(dists[t], kind="stable")[:kk]
        votes = np.bincount(train_y[neighbors], minlength=num_classes)
        preds[t] = int(votes.argmax())
        pos_fraction[t] = votes[1] / kk if num_classes >= 2 else 0.0
    return preds, pos_fraction


def knn_cv_details(ed: EmbeddedDataset, k: int, folds: int, seed: int):
    """Fold accuracies plus pooled out-of-fold predictions and scores."""
    if ed.labels is None:
        raise ValueError("embedded dataset has no labels")
    labels = np.asarray(ed.labels, dtype=np.int64)
    if folds > len(labels):
        raise ValueError("more folds than samples")
    num_classes = max(ed.num_classes, int(labels.max()) + 1)
    assignment = _stratified_folds(labels, folds, seed)
    accuracies = np.empty(folds)
    predictions = np.empty(len(labels), dtype=np.int64)
    scores = np.empty(len(labels))
    for f in range(folds):
        test_mask = assignment == f
        train_idx = np.flatnonzero(~test_mask)
        test_idx = np.flatnonzero(test_mask)
        preds, pos = _knn_predict(
            ed.vectors[train_idx], labels[train_idx], ed.vectors[test_idx], k, num_classes
        )
        predictions[test_idx] = preds
        scores[test_idx] = pos
        accuracies[f] = float(np.mean(preds == labels[test_idx]))
    return accuracies, predictions, scores


def knn_cross_validate(ed: EmbeddedDataset, k: int, folds: int,
                       seed: int) -> tuple[float, float]:
    """Mean and standard deviation of stratified k-NN fold accuracies."""
    accuracies, _, _ = knn_cv_details(ed, k, folds, seed)
    return float(accuracies.mean()), float(accuracies.std())


def roc_auc(scores, labels) -> float:
    """Rank-based AUC with midranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# Complexity measurement


@dataclass
class ProbeRow:
    num_graphs: int
    wegl_solves: int
    wegl_seconds: float
    pairwise_solves: int | None
    pairwise_seconds: float | None


def synthetic_dataset(num_graphs: int, num_nodes: int = 16, feature_dim: int = 3,
                      edge_prob: float = 0.3, seed: int = 0) -> GraphDataset:
    """Random attributed graphs of a fixed size, for timing and smoke tests."""
    rng = np.random.default_rng(seed)
    graphs = []
    pairs = np.array([(u, v) for u in range(num_nodes) for v in range(u + 1, num_nodes)])
    for _ in range(num_graphs):
        mask = rng.random(len(pairs)) < edge_prob
        edges = pairs[mask].reshape(-1, 2)
        feats = rng.standard_normal((num_nodes, feature_dim))
        graphs.append(Graph(num_nodes=num_nodes, edges=edges, node_features=feats,
                            label=int(rng.integers(2))))
    return GraphDataset(graphs=tuple(graphs), node_feature_dim=feature_dim,
                        edge_feature_dim=None, num_classes=2,
                        name=f"synthetic_{num_graphs}")


def complexity_probe(dataset_sizes: list[int], config: PipelineConfig | None = None,
                     num_nodes: int = 16, pairwise_limit: int = 64,
                     seed: int = 0, csv_path: str | None = None) -> list[ProbeRow]:
    """Solve counts and wall times for embedding versus pairwise transport.

    Embedding a dataset of M graphs costs exactly M exact OT solves; the
    pairwise alternative costs M(M-1)/2, so it is only run up to
    pairwise_limit graphs.  Optionally writes the rows as CSV.
    """
    if config is None:
        config = PipelineConfig(reference_source="normal", degree_feature_mode="none")
    rows = []
    for m in dataset_sizes:
        dataset = synthetic_dataset(m, num_nodes=num_nodes, seed=seed)
        transport.reset_solve_count()
        start = time.perf_counter()
        wegl_embed(dataset, config)
        wegl_seconds = time.perf_counter() - start
        wegl_solves = transport.solve_count()

        pairwise_solves = None
        pairwise_seconds = None
        if m <= pairwise_limit:
            embeddings = [node_embedding(g, config.diffusion) for g in dataset.graphs]
            standardized, _, _ = standardize(embeddings)
            transport.reset_solve_count()
            start = time.perf_counter()
            for i in range(m):
                for j in range(i + 1, m):
                    transport.wasserstein2(standardized[i], standardized[j])
            pairwise_seconds = time.perf_counter() - start
            pairwise_solves = transport.solve_count()
        rows.append(ProbeRow(m, wegl_solves, wegl_seconds, pairwise_solves, pairwise_seconds))

    if csv_path is not None:
        write_csv(
            csv_path,
            ["M", "wegl_solves", "wegl_seconds", "pairwise_solves", "pairwise_seconds"],
            [
                (r.num_graphs, r.wegl_solves, r.wegl_seconds,
                 "" if r.pairwise_solves is None else r.pairwise_solves,
                 "" if r.pairwise_seconds is None else r.pairwise_seconds)
                for r in rows
            ],
        )
    return rows


# ---------------------------------------------------------------------------
# Persistence


def export_embedded(ed: EmbeddedDataset, path: str) -> None:
    metadata = {
        "kind": "embedded_dataset",
        "name": ed.name,
        "labels": None if ed.labels is None else [int(x) for x in ed.labels],
        "num_classes": ed.num_classes,
        "config_digest": ed.config_digest,
        "embedding_shape": list(ed.embedding_shape),
        "ot_solve_count": ed.ot_solve_count,
        "reference": {
            "points": ed.reference.points.tolist(),
            "provenance": ed.reference.provenance,
            "seed": ed.reference.seed,
        },
    }
    save_matrix(path, ed.vectors, metadata)


def import_embedded(path: str) -> EmbeddedDataset:
    vectors, metadata = load_matrix(path)
    if metadata.get("kind") != "embedded_dataset":
        raise ValueError(f"{path}: not an embedded dataset file")
    ref = metadata["reference"]
    reference = Reference(points=np.array(ref["points"], dtype=np.float64),
                          provenance=ref["provenance"], seed=int(ref["seed"]))
    labels = metadata.get("labels")
    return EmbeddedDataset(
        vectors=vectors,
        labels=None if labels is None else np.array(labels, dtype=np.int64),
        reference=reference,
        config_digest=metadata["config_digest"],
        embedding_shape=tuple(metadata["embedding_shape"]),
        ot_solve_count=int(metadata.get("ot_solve_count", 0)),
        name=metadata.get("name", ""),
        num_classes=int(metadata.get("num_classes", 0)),
    )


def export_csv(ed: EmbeddedDataset, path: str) -> None:
    """One graph per row, embedding coordinates then the label column."""
    width = ed.vectors.shape[1]
    header = [f"x{i}" for i in range(width)] + ["label"]
    labels = ed.labels if ed.labels is not None else np.full(len(ed.vectors), -1, dtype=np.int64)
    rows = ([*vec, int(lbl)] for vec, lbl in zip(ed.vectors, labels))
    write_csv(path, header, rows)
