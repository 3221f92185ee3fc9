"""Graph containers, dataset ingestion, and initial node/edge feature construction.

Graphs are stored undirected with 0-indexed nodes.  Self-loops are never
stored explicitly; every diffusion step adds its own self-connection.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Graph",
    "GraphDataset",
    "parse_tud",
    "load_json",
    "save_json",
    "write_tud",
    "degrees",
    "dataset_max_degree",
    "degree_features",
    "one_hot_edge_features",
    "add_virtual_node",
]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """One undirected attributed graph.

    edges holds one row per undirected edge; edge_features (nonnegative reals)
    and edge_labels (raw categorical ids, pre one-hot) are aligned with it.
    """

    num_nodes: int
    edges: np.ndarray                     # (|E|, 2) int
    node_features: np.ndarray             # (|V|, F) float64
    edge_features: np.ndarray | None = None   # (|E|, E_dim) float64, >= 0
    edge_labels: np.ndarray | None = None      # (|E|,) or (|E|, R) int
    label: int | None = None

    def __post_init__(self):
        edges = _frozen_array(self.edges, np.int64).reshape(-1, 2)
        feats = _frozen_array(self.node_features, np.float64)
        if feats.ndim != 2:
            feats = feats.reshape(self.num_nodes, -1)
            feats.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "node_features", feats)
        if self.edge_features is not None:
            ef = _frozen_array(self.edge_features, np.float64)
            if ef.ndim == 1:
                ef = ef.reshape(-1, 1)
                ef.setflags(write=False)
            object.__setattr__(self, "edge_features", ef)
        if self.edge_labels is not None:
            object.__setattr__(self, "edge_labels", _frozen_array(self.edge_labels, np.int64))
        self._validate()

    def _validate(self):
        if self.num_nodes < 0:
            raise ValueError("num_nodes must be nonnegative")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.num_nodes:
                raise ValueError("edge endpoint index out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("explicit self-loops are not allowed")
        if self.node_features.shape[0] != self.num_nodes:
            raise ValueError("node_features row count must equal num_nodes")
        if self.edge_features is not None:
            if self.edge_features.shape[0] != len(self.edges):
                raise ValueError("edge_features row count must equal number of edges")
            if self.edge_features.size and self.edge_features.min() < 0:
                raise ValueError("edge features must be nonnegative")
        if self.edge_labels is not None and self.edge_labels.shape[0] != len(self.edges):
            raise ValueError("edge_labels row count must equal number of edges")

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class GraphDataset:
    """A named collection of graphs sharing feature dimensions."""

    graphs: tuple[Graph, ...]
    node_feature_dim: int
    edge_feature_dim: int | None
    num_classes: int
    name: str

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for g in self.graphs:
            if g.node_features.shape[1] != self.node_feature_dim:
                raise ValueError("all graphs must share the node feature dimension")
            gdim = None if g.edge_features is None else g.edge_features.shape[1]
            if gdim != self.edge_feature_dim:
                raise ValueError("all graphs must share the edge feature dimension")
            if g.label is not None and not (0 <= g.label < self.num_classes):
                raise ValueError(f"label {g.label} outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray | None:
        if any(g.label is None for g in self.graphs):
            return None
        return np.array([g.label for g in self.graphs], dtype=np.int64)


# ---------------------------------------------------------------------------
# TUD benchmark text format


def _read_int_lines(path: str) -> list[list[int]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            out.append([int(tok) for tok in line.replace(",", " ").split()])
    return out


def _read_float_lines(path: str) -> list[list[float]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            out.append([float(tok) for tok in line.replace(",", " ").split()])
    return out


def _one_hot_columns(raw: np.ndarray) -> np.ndarray:
    """One-hot encode each column of an integer matrix over its sorted distinct values."""
    blocks = []
    for col in raw.T:
        cats = np.unique(col)
        block = np.zeros((len(col), len(cats)))
        block[np.arange(len(col)), np.searchsorted(cats, col)] = 1.0
        blocks.append(block)
    return np.hstack(blocks) if blocks else np.zeros((len(raw), 0))


def parse_tud(directory: str, dataset_name: str) -> GraphDataset:
    """Parse a dataset in the published TUD text layout.

    Requires ``<name>_A.txt`` (1-indexed directed edge list),
    ``<name>_graph_indicator.txt`` and ``<name>_graph_labels.txt``; picks up
    ``_node_labels``/``_node_attributes``/``_edge_labels`` when present.
    Categorical node labels are one-hot encoded; node attributes are used as-is;
    when both exist they are concatenated [one-hot labels || attributes].
    The two directed copies of each edge collapse to one undirected edge.
    """
    def fname(suffix):
        return os.path.join(directory, f"{dataset_name}_{suffix}.txt")

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not os.path.isfile(fname(suffix)):
            raise FileNotFoundError(f"missing required file: {fname(suffix)}")

    indicator = np.array([row[0] for row in _read_int_lines(fname("graph_indicator"))])
    num_nodes_total = len(indicator)
    graph_ids = np.unique(indicator)
    num_graphs = len(graph_ids)
    if not np.array_equal(graph_ids, np.arange(1, num_graphs + 1)):
        raise ValueError("graph_indicator must number graphs densely from 1")

    raw_graph_labels = np.array([row[0] for row in _read_int_lines(fname("graph_labels"))])
    if len(raw_graph_labels) != num_graphs:
        raise ValueError("graph_labels length inconsistent with graph_indicator")
    classes = np.unique(raw_graph_labels)
    graph_labels = np.searchsorted(classes, raw_graph_labels)

    # Node features: one-hot labels, raw attributes, or their concatenation.
    blocks = []
    if os.path.isfile(fname("node_labels")):
        raw = np.array(_read_int_lines(fname("node_labels")))
        if len(raw) != num_nodes_total:
            raise ValueError("node_labels length inconsistent with graph_indicator")
        blocks.append(_one_hot_columns(raw))
    if os.path.isfile(fname("node_attributes")):
        raw = np.array(_read_float_lines(fname("node_attributes")))
        if len(raw) != num_nodes_total:
            raise ValueError("node_attributes length inconsistent with graph_indicator")
        blocks.append(raw)
    if blocks:
        all_features = np.hstack(blocks)
    else:
        all_features = np.zeros((num_nodes_total, 0))

    edge_lines = _read_int_lines(fname("A"))
    edge_label_rows = None
    if os.path.isfile(fname("edge_labels")):
        edge_label_rows = _read_int_lines(fname("edge_labels"))
        if len(edge_label_rows) != len(edge_lines):
            raise ValueError("edge_labels length inconsistent with edge list")

    # Group nodes by graph; TUD files are 1-indexed.
    node_graph = indicator - 1
    first_node = np.zeros(num_graphs, dtype=np.int64)
    counts = np.bincount(node_graph, minlength=num_graphs)
    first_node[1:] = np.cumsum(counts)[:-1]

    # Deduplicate the two directed copies of every edge; the first occurrence
    # decides the stored order and label.
    per_graph_edges: list[dict[tuple[int, int], list[int] | None]] = [dict() for _ in range(num_graphs)]
    for lineno, pair in enumerate(edge_lines):
        if len(pair) != 2:
            raise ValueError(f"malformed edge line {lineno + 1}")
        u, v = pair[0] - 1, pair[1] - 1
        if not (0 <= u < num_nodes_total and 0 <= v < num_nodes_total):
            raise ValueError(f"edge endpoint out of range on line {lineno + 1}")
        gu, gv = node_graph[u], node_graph[v]
        if gu != gv:
            raise ValueError(f"edge on line {lineno + 1} crosses graphs")
        if u == v:
            continue  # implicit self-connections are added by diffusion
        key = (min(u, v), max(u, v))
        if key not in per_graph_edges[gu]:
            label = edge_label_rows[lineno] if edge_label_rows is not None else None
            per_graph_edges[gu][key] = label

    graphs = []
    label_width = None
    for gi in range(num_graphs):
        base = first_node[gi]
        n = counts[gi]
        items = sorted(per_graph_edges[gi].items())
        edges = np.array([(u - base, v - base) for (u, v), _ in items], dtype=np.int64).reshape(-1, 2)
        elabels = None
        if edge_label_rows is not None:
            rows = [lbl for _, lbl in items]
            width = len(rows[0]) if rows else (label_width or 1)
            label_width = width
            elabels = np.array(rows, dtype=np.int64).reshape(-1, width)
            if width == 1:
                elabels = elabels[:, 0]
        graphs.append(Graph(
            num_nodes=int(n),
            edges=edges,
            node_features=all_features[base:base + n],
            edge_labels=elabels,
            label=int(graph_labels[gi]),
        ))

    return GraphDataset(
        graphs=tuple(graphs),
        node_feature_dim=all_features.shape[1],
        edge_feature_dim=None,
        num_classes=len(classes),
        name=dataset_name,
    )


def write_tud(dataset: GraphDataset, directory: str) -> None:
    """Write a dataset back out in the TUD text layout (both edge directions).

    Only what the format can carry survives: node features are written as
    ``_node_attributes``, categorical edge labels as ``_edge_labels``;
    real-valued edge features have no TUD representation and are dropped.
    """
    os.makedirs(directory, exist_ok=True)
    name = dataset.name

    def fname(suffix):
        return os.path.join(directory, f"{name}_{suffix}.txt")

    a_lines, ind_lines, glabel_lines, attr_lines, elabel_lines = [], [], [], [], []
    offset = 0
    has_edge_labels = all(g.edge_labels is not None for g in dataset.graphs) and len(dataset.graphs) > 0
    for gi, g in enumerate(dataset.graphs, start=1):
        ind_lines.extend([str(gi)] * g.num_nodes)
        glabel_lines.append(str(g.label if g.label is not None else 0))
        for row in g.node_features:
            attr_lines.append(", ".join(repr(float(x)) for x in row))
        for ei, (u, v) in enumerate(g.edges):
            a_lines.append(f"{u + 1 + offset}, {v + 1 + offset}")
            a_lines.append(f"{v + 1 + offset}, {u + 1 + offset}")
            if has_edge_labels:
                lbl = np.atleast_1d(g.edge_labels[ei])
                elabel_lines.extend([", ".join(str(int(x)) for x in lbl)] * 2)
        offset += g.num_nodes

    with open(fname("A"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(a_lines) + ("\n" if a_lines else ""))
    with open(fname("graph_indicator"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(ind_lines) + "\n")
    with open(fname("graph_labels"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(glabel_lines) + "\n")
    if dataset.node_feature_dim > 0:
        with open(fname("node_attributes"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(attr_lines) + "\n")
    if has_edge_labels:
        with open(fname("edge_labels"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(elabel_lines) + "\n")


# ---------------------------------------------------------------------------
# Generic JSON graph format


def _graph_to_dict(g: Graph) -> dict:
    d = {
        "num_nodes": g.num_nodes,
        "edges": g.edges.tolist(),
        "node_features": g.node_features.tolist(),
    }
    if g.edge_features is not None:
        d["edge_features"] = g.edge_features.tolist()
    if g.edge_labels is not None:
        d["edge_labels"] = g.edge_labels.tolist()
    if g.label is not None:
        d["label"] = int(g.label)
    return d


def _graph_from_dict(d: dict) -> Graph:
    n = int(d["num_nodes"])
    feats = d.get("node_features")
    if feats is None:
        feats = np.zeros((n, 0))
    return Graph(
        num_nodes=n,
        edges=np.array(d.get("edges", []), dtype=np.int64).reshape(-1, 2),
        node_features=np.array(feats, dtype=np.float64).reshape(n, -1),
        edge_features=None if d.get("edge_features") is None else np.array(d["edge_features"], dtype=np.float64),
        edge_labels=None if d.get("edge_labels") is None else np.array(d["edge_labels"], dtype=np.int64),
        label=None if d.get("label") is None else int(d["label"]),
    )


def save_json(dataset: GraphDataset, path: str) -> None:
    doc = {
        "name": dataset.name,
        "num_classes": dataset.num_classes,
        "graphs": [_graph_to_dict(g) for g in dataset.graphs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_json(path: str) -> GraphDataset:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    graphs = tuple(_graph_from_dict(d) for d in doc["graphs"])
    if not graphs:
        raise ValueError("dataset contains no graphs")
    labels = [g.label for g in graphs if g.label is not None]
    num_classes = int(doc.get("num_classes", (max(labels) + 1) if labels else 0))
    node_dim = graphs[0].node_features.shape[1]
    edge_dim = None if graphs[0].edge_features is None else graphs[0].edge_features.shape[1]
    return GraphDataset(
        graphs=graphs,
        node_feature_dim=node_dim,
        edge_feature_dim=edge_dim,
        num_classes=num_classes,
        name=str(doc.get("name", os.path.splitext(os.path.basename(path))[0])),
    )


# ---------------------------------------------------------------------------
# Initial feature construction


def degrees(g: Graph) -> np.ndarray:
    """Neighbor counts per node, without the diffusion self-connection."""
    deg = np.zeros(g.num_nodes, dtype=np.int64)
    if g.edges.size:
        deg += np.bincount(g.edges[:, 0], minlength=g.num_nodes)
        deg += np.bincount(g.edges[:, 1], minlength=g.num_nodes)
    return deg


def dataset_max_degree(dataset: GraphDataset, clip: int | None = None) -> int:
    """Dataset-wide maximum node degree, after optional clipping."""
    best = 0
    for g in dataset.graphs:
        if g.num_nodes:
            d = int(degrees(g).max(initial=0))
            best = max(best, min(d, clip) if clip is not None else d)
    return best


def degree_features(g: Graph, mode: str, clip: int | None = None,
                    max_degree: int | None = None) -> Graph:
    """Replace node features with (clipped) degrees, scalar or one-hot.

    One-hot width is ``max_degree + 1``, where max_degree is the dataset-wide
    maximum after clipping, so every graph in a dataset gets the same width.
    """
    deg = degrees(g)
    if clip is not None:
        deg = np.minimum(deg, clip)
    if mode == "scalar":
        feats = deg.astype(np.float64)[:, None]
    elif mode == "one_hot":
        if max_degree is None:
            raise ValueError("one_hot mode requires max_degree")
        if deg.size and deg.max() > max_degree:
            raise ValueError(f"degree {deg.max()} exceeds max_degree {max_degree}")
        feats = np.zeros((g.num_nodes, max_degree + 1))
        feats[np.arange(g.num_nodes), deg] = 1.0
    else:
        raise ValueError(f"unknown degree feature mode: {mode!r}")
    return replace(g, node_features=feats)


def one_hot_edge_features(g: Graph, num_categories_per_label: list[int]) -> Graph:
    """One-hot encode categorical edge labels into binary edge features.

    Multiple categorical labels per edge are encoded independently and
    concatenated, giving width equal to the sum of the category counts.
    """
    if g.edge_labels is None:
        raise ValueError("graph has no categorical edge labels")
    labels = g.edge_labels.reshape(g.num_edges, -1)
    if labels.shape[1] != len(num_categories_per_label):
        raise ValueError("num_categories_per_label length must match label columns")
    total = int(sum(num_categories_per_label))
    feats = np.zeros((g.num_edges, total))
    start = 0
    for col, ncat in enumerate(num_categories_per_label):
        vals = labels[:, col]
        if vals.size and (vals.min() < 0 or vals.max() >= ncat):
            raise ValueError(f"edge label column {col} outside [0, {ncat})")
        feats[np.arange(g.num_edges), start + vals] = 1.0
        start += ncat
    return replace(g, edge_features=feats, edge_labels=None)


def add_virtual_node(g: Graph) -> Graph:
    """Append a zero-featured node connected to all others with 1/|V| edge features.

    The small edge weight keeps the new node's weighted degree comparable to
    the rest of the graph; its embedding stays part of the node set downstream.
    """
    if g.num_nodes == 0:
        raise ValueError("cannot add a virtual node to an empty graph")
    n = g.num_nodes
    ef = g.edge_features
    if ef is None:
        ef = np.ones((g.num_edges, 1))
    new_edges = np.column_stack([np.arange(n), np.full(n, n)])
    virt_feats = np.full((n, ef.shape[1]), 1.0 / n)
    return Graph(
        num_nodes=n + 1,
        edges=np.vstack([g.edges.reshape(-1, 2), new_edges]),
        node_features=np.vstack([g.node_features, np.zeros((1, g.node_features.shape[1]))]),
        edge_features=np.vstack([ef, virt_feats]),
        label=g.label,
    )
