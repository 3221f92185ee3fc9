"""Non-parametric diffusion node embeddings.

Each layer propagates node features over edges normalized by the square
roots of the endpoint degrees, with an implicit self-connection per node.
The per-layer feature stack is then reduced per node (concat/average/final)
into the node embedding matrix used downstream.  All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, degrees

__all__ = ["DiffusionConfig", "diffuse", "diffuse_multi_edge", "pool_nodes", "node_embedding"]

POOLING_MODES = ("concat", "average", "final")


@dataclass(frozen=True)
class DiffusionConfig:
    """Number of propagation rounds and the per-node layer pooling."""

    num_layers: int = 4
    pooling: str = "final"

    def __post_init__(self):
        if self.num_layers < 0:
            raise ValueError("num_layers must be >= 0")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}")

    def output_dim(self, feature_dim: int) -> int:
        return (self.num_layers + 1) * feature_dim if self.pooling == "concat" else feature_dim


def _propagate(x0: np.ndarray, src: np.ndarray, dst: np.ndarray,
               coeff: np.ndarray, num_layers: int) -> np.ndarray:
    """Apply the normalized operator num_layers times; returns the (L+1, |V|, F) stack."""
    stack = np.empty((num_layers + 1,) + x0.shape)
    stack[0] = x0
    for layer in range(1, num_layers + 1):
        nxt = np.zeros_like(x0)
        np.add.at(nxt, dst, coeff[:, None] * stack[layer - 1][src])
        stack[layer] = nxt
    return stack


def diffuse(g: Graph, num_layers: int) -> np.ndarray:
    """Degree-normalized diffusion with scalar edge weights.

    Messages from u to v are weighted by w_uv / sqrt(deg(u) * deg(v)), where
    deg counts neighbors plus the self-connection; absent weights (including
    self-connections) are one.  Returns the (L+1, |V|, F) layer stack.
    """
    if g.edge_features is not None and g.edge_features.shape[1] != 1:
        raise ValueError("diffuse expects scalar edge weights; use diffuse_multi_edge")
    weights = np.ones(g.num_edges) if g.edge_features is None else g.edge_features[:, 0].copy()
    if weights.size and weights.min() < 0:
        raise ValueError("edge weights must be nonnegative")

    deg = (degrees(g) + 1).astype(np.float64)
    u, v = g.edges[:, 0], g.edges[:, 1]
    loops = np.arange(g.num_nodes)
    src = np.concatenate([u, v, loops])
    dst = np.concatenate([v, u, loops])
    w = np.concatenate([weights, weights, np.ones(g.num_nodes)])
    coeff = w / np.sqrt(deg[src] * deg[dst])
    return _propagate(g.node_features, src, dst, coeff, num_layers)


def diffuse_multi_edge(g: Graph, num_layers: int) -> np.ndarray:
    """Diffusion over multi-dimensional nonnegative edge features.

    Each feature coordinate acts as a parallel edge-weighted graph with its
    own weighted degree (self-connections carry all-one features, so degrees
    stay >= 1); the per-channel normalized messages are summed into a single
    propagation coefficient per node pair.
    """
    if g.edge_features is None:
        raise ValueError("diffuse_multi_edge requires edge features")
    feats = g.edge_features
    if feats.size and feats.min() < 0:
        raise ValueError("edge features must be nonnegative")

    # Per-channel weighted degree, including the all-one self-connection.
    deg = np.ones((g.num_nodes, feats.shape[1]))
    u, v = g.edges[:, 0], g.edges[:, 1]
    np.add.at(deg, u, feats)
    np.add.at(deg, v, feats)

    loops = np.arange(g.num_nodes)
    src = np.concatenate([u, v, loops])
    dst = np.concatenate([v, u, loops])
    w = np.vstack([feats, feats, np.ones((g.num_nodes, feats.shape[1]))])
    coeff = (w / np.sqrt(deg[src] * deg[dst])).sum(axis=1)
    return _propagate(g.node_features, src, dst, coeff, num_layers)


def pool_nodes(stack: np.ndarray, mode: str) -> np.ndarray:
    """Reduce the (L+1, |V|, F) layer stack to one embedding row per node."""
    if mode == "concat":
        return np.hstack(list(stack))
    if mode == "average":
        return stack.mean(axis=0)
    if mode == "final":
        return stack[-1].copy()
    raise ValueError(f"pooling must be one of {POOLING_MODES}")


def node_embedding(g: Graph, config: DiffusionConfig) -> np.ndarray:
    """Diffuse then pool: the full node embedding for one graph."""
    if g.edge_features is not None:
        stack = diffuse_multi_edge(g, config.num_layers)
    else:
        stack = diffuse(g, config.num_layers)
    return pool_nodes(stack, config.pooling)
