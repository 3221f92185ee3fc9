"""Fixed-size graph vectors via diffusion node embeddings and a linear
Wasserstein embedding against a reference distribution."""

from .graphs import (
    Graph, GraphDataset, add_virtual_node, degree_features, load_json,
    one_hot_edge_features, parse_tud, save_json,
)
from .diffusion import DiffusionConfig, diffuse, diffuse_multi_edge, node_embedding, pool_nodes
from .transport import (
    OptimalityCertificate, TransportPlan, sinkhorn, solve_ot, squared_cost,
    verify_optimality, wasserstein2,
)
from .reference import Reference, kmeans, normal_reference, reference_size
from .lot import (
    GraphEmbedding, barycentric_project, embedding_geodesic, embedding_mean,
    lot_distance, lot_embed, make_ring_dataset, pseudo_invert,
)
from .pipeline import (
    EmbeddedDataset, PipelineConfig, complexity_probe, export_csv, export_embedded,
    import_embedded, knn_cross_validate, pca, roc_auc, standardize, wegl_embed,
)

__version__ = "0.1.0"
