import numpy as np
import pytest

from wegl.graphs import (
    Graph, GraphDataset, add_virtual_node, dataset_max_degree, degree_features,
    degrees, load_json, one_hot_edge_features, parse_tud, save_json, write_tud,
)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


def make_two_triangles(tmp_path, name="toy"):
    d = tmp_path / name
    d.mkdir()
    # two triangles, nodes 1..3 and 4..6, both edge directions stored
    edges = []
    for a, b in [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)]:
        edges.append(f"{a}, {b}")
        edges.append(f"{b}, {a}")
    write_lines(d / f"{name}_A.txt", edges)
    write_lines(d / f"{name}_graph_indicator.txt", ["1", "1", "1", "2", "2", "2"])
    write_lines(d / f"{name}_graph_labels.txt", ["-1", "1"])
    return d


def triangle(**kwargs):
    return Graph(num_nodes=3, edges=np.array([[0, 1], [1, 2], [0, 2]]),
                 node_features=np.zeros((3, 1)), **kwargs)


class TestGraphInvariants:
    def test_endpoint_out_of_range(self):
        with pytest.raises(ValueError):
            Graph(num_nodes=2, edges=np.array([[0, 2]]), node_features=np.zeros((2, 1)))

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            Graph(num_nodes=2, edges=np.array([[1, 1]]), node_features=np.zeros((2, 1)))

    def test_feature_row_count(self):
        with pytest.raises(ValueError):
            Graph(num_nodes=3, edges=np.zeros((0, 2), dtype=int), node_features=np.zeros((2, 1)))

    def test_negative_edge_features_rejected(self):
        with pytest.raises(ValueError):
            triangle(edge_features=np.array([[1.0], [-0.5], [1.0]]))

    def test_arrays_are_frozen(self):
        g = triangle()
        with pytest.raises(ValueError):
            g.edges[0, 0] = 5


class TestParseTud:
    def test_two_triangle_toy(self, tmp_path):
        d = make_two_triangles(tmp_path)
        ds = parse_tud(str(d), "toy")
        assert len(ds) == 2
        assert ds.num_classes == 2
        for g in ds.graphs:
            assert g.num_nodes == 3
            assert g.num_edges == 3
        # labels {-1, 1} remap to {0, 1}
        assert [g.label for g in ds.graphs] == [0, 1]

    def test_lone_direction_accepted(self, tmp_path):
        d = tmp_path / "lone"
        d.mkdir()
        write_lines(d / "lone_A.txt", ["1, 2"])
        write_lines(d / "lone_graph_indicator.txt", ["1", "1"])
        write_lines(d / "lone_graph_labels.txt", ["0"])
        ds = parse_tud(str(d), "lone")
        assert ds.graphs[0].num_edges == 1

    def test_zero_index_rejected(self, tmp_path):
        d = tmp_path / "bad"
        d.mkdir()
        write_lines(d / "bad_A.txt", ["0, 1"])  # 1-indexed format: node 0 is out of range
        write_lines(d / "bad_graph_indicator.txt", ["1", "1"])
        write_lines(d / "bad_graph_labels.txt", ["0"])
        with pytest.raises(ValueError, match="out of range"):
            parse_tud(str(d), "bad")

    def test_missing_required_file(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        with pytest.raises(FileNotFoundError):
            parse_tud(str(d), "empty")

    def test_inconsistent_label_count(self, tmp_path):
        d = make_two_triangles(tmp_path)
        write_lines(d / "toy_graph_labels.txt", ["0", "1", "1"])
        with pytest.raises(ValueError, match="inconsistent"):
            parse_tud(str(d), "toy")

    def test_node_labels_one_hot_and_attributes_concat(self, tmp_path):
        d = make_two_triangles(tmp_path)
        write_lines(d / "toy_node_labels.txt", ["0", "1", "2", "0", "0", "1"])
        write_lines(d / "toy_node_attributes.txt", ["0.5, 1.5"] * 6)
        ds = parse_tud(str(d), "toy")
        assert ds.node_feature_dim == 5  # 3 label categories + 2 attributes
        assert np.allclose(ds.graphs[0].node_features[0], [1, 0, 0, 0.5, 1.5])

    def test_edge_labels_kept_categorical(self, tmp_path):
        d = make_two_triangles(tmp_path)
        write_lines(d / "toy_edge_labels.txt", [str(i % 3) for i in range(12)])
        ds = parse_tud(str(d), "toy")
        g = ds.graphs[0]
        assert g.edge_labels is not None
        assert g.edge_features is None

    def test_round_trip_through_json(self, tmp_path):
        d = make_two_triangles(tmp_path)
        write_lines(d / "toy_node_attributes.txt", [f"{0.25 * i}" for i in range(6)])
        ds = parse_tud(str(d), "toy")
        path = tmp_path / "toy.json"
        save_json(ds, str(path))
        again = load_json(str(path))
        assert len(again) == len(ds)
        assert again.num_classes == ds.num_classes
        for a, b in zip(ds.graphs, again.graphs):
            assert a.num_nodes == b.num_nodes
            assert np.array_equal(a.edges, b.edges)
            assert np.array_equal(a.node_features, b.node_features)
            assert a.label == b.label

    def test_round_trip_through_tud(self, tmp_path):
        d = make_two_triangles(tmp_path)
        write_lines(d / "toy_node_attributes.txt", [f"{0.25 * i}, {i}" for i in range(6)])
        ds = parse_tud(str(d), "toy")
        out = tmp_path / "rewritten"
        write_tud(ds, str(out))
        again = parse_tud(str(out), "toy")
        for a, b in zip(ds.graphs, again.graphs):
            assert a.num_nodes == b.num_nodes
            assert np.array_equal(a.edges, b.edges)
            assert np.array_equal(a.node_features, b.node_features)
            assert a.label == b.label


class TestDegreeFeatures:
    def test_triangle_scalar(self):
        g = degree_features(triangle(), "scalar")
        assert np.array_equal(g.node_features, [[2.0], [2.0], [2.0]])

    def test_path_one_hot(self):
        path = Graph(num_nodes=3, edges=np.array([[0, 1], [1, 2]]),
                     node_features=np.zeros((3, 1)))
        g = degree_features(path, "one_hot", max_degree=2)
        assert np.array_equal(g.node_features, [[0, 1, 0], [0, 0, 1], [0, 1, 0]])

    def test_star_clip(self):
        n = 601
        edges = np.column_stack([np.zeros(n - 1, dtype=int), np.arange(1, n)])
        star = Graph(num_nodes=n, edges=edges, node_features=np.zeros((n, 1)))
        g = degree_features(star, "scalar", clip=500)
        assert g.node_features[0, 0] == 500.0
        assert g.node_features[1, 0] == 1.0

    def test_degree_exceeds_max(self):
        with pytest.raises(ValueError, match="exceeds"):
            degree_features(triangle(), "one_hot", max_degree=1)

    def test_scalar_degrees_match_adjacency_row_sums(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(2, 11))
            adj = np.triu(rng.random((n, n)) < 0.4, k=1)
            edges = np.argwhere(adj)
            g = Graph(num_nodes=n, edges=edges.reshape(-1, 2),
                      node_features=np.zeros((n, 1)))
            dense = adj | adj.T
            assert np.array_equal(degrees(g), dense.sum(axis=1))

    def test_dataset_max_degree_after_clip(self):
        g1 = triangle()
        ds = GraphDataset(graphs=(g1,), node_feature_dim=1, edge_feature_dim=None,
                          num_classes=1, name="t")
        assert dataset_max_degree(ds) == 2
        assert dataset_max_degree(ds, clip=1) == 1


class TestOneHotEdgeFeatures:
    def test_single_label_width_four(self):
        g = triangle(edge_labels=np.array([2, 0, 3]))
        out = one_hot_edge_features(g, [4])
        assert np.array_equal(out.edge_features[0], [0, 0, 1, 0])
        assert out.edge_features.shape == (3, 4)

    def test_two_labels_concatenated(self):
        g = triangle(edge_labels=np.array([[1, 0], [0, 2], [1, 1]]))
        out = one_hot_edge_features(g, [2, 3])
        assert np.array_equal(out.edge_features[0], [0, 1, 1, 0, 0])

    def test_out_of_range_label(self):
        g = triangle(edge_labels=np.array([4, 0, 1]))
        with pytest.raises(ValueError):
            one_hot_edge_features(g, [4])


class TestVirtualNode:
    def test_k3(self):
        g = add_virtual_node(triangle(edge_features=np.ones((3, 1))))
        assert g.num_nodes == 4
        assert g.num_edges == 6
        assert np.allclose(g.edge_features[3:], 1.0 / 3.0)
        assert np.allclose(g.edge_features[:3], 1.0)
        assert np.all(g.node_features[-1] == 0.0)

    def test_single_node(self):
        g = Graph(num_nodes=1, edges=np.zeros((0, 2), dtype=int), node_features=np.ones((1, 2)))
        out = add_virtual_node(g)
        assert out.num_nodes == 2
        assert out.num_edges == 1
        assert out.edge_features[0, 0] == 1.0

    def test_empty_graph_rejected(self):
        g = Graph(num_nodes=0, edges=np.zeros((0, 2), dtype=int), node_features=np.zeros((0, 1)))
        with pytest.raises(ValueError):
            add_virtual_node(g)

    def test_counts_and_original_edges_preserved(self):
        base = triangle(edge_features=np.full((3, 2), 0.5))
        out = add_virtual_node(base)
        assert out.num_nodes == base.num_nodes + 1
        assert out.num_edges == base.num_edges + base.num_nodes
        assert np.array_equal(out.edges[:3], base.edges)
        assert np.array_equal(out.edge_features[:3], base.edge_features)
