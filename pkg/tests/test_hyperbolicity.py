import numpy as np
import pytest

from hypalign.errors import DataError
from hypalign.graphs import Network, load_edge_list
from hypalign.hyperbolicity import (all_pairs_distances, four_point_delta,
                                    graph_delta)

from conftest import balanced_binary_tree, path_graph


class TestAllPairsDistances:
    def test_path(self):
        d = all_pairs_distances(load_edge_list("a b\nb c"))
        assert d[0, 2] == 2.0

    def test_isolated_node_is_infinite(self):
        net = Network(nodes=["a", "b", "c"], adjacency=[[1], [0], []])
        d = all_pairs_distances(net)
        assert np.isinf(d[0, 2]) and np.isinf(d[2, 1])
        assert d[2, 2] == 0.0

    def test_triangle(self):
        d = all_pairs_distances(load_edge_list("a b\nb c\nc a"))
        off = d[~np.eye(3, dtype=bool)]
        assert np.all(off == 1.0)

    def test_symmetric_zero_diagonal(self, zachary):
        d = all_pairs_distances(zachary)
        assert np.allclose(d, d.T)
        assert np.all(np.diag(d) == 0)


class TestFourPointDelta:
    def test_path_quadruple(self):
        # nodes 0-1-2-3 on a path: pair sums (3+1, 1+1... ) computed
        # from hop distances d01=1 d02=2 d03=3 d12=1 d13=2 d23=1
        assert four_point_delta(1, 1, 2, 2, 3, 1) == 0.0

    def test_four_cycle(self):
        # 4-cycle: adjacent pairs at 1, diagonals at 2
        # sums (d01+d23, d02+d13, d03+d12) = (2, 4, 2)
        assert four_point_delta(1, 1, 2, 2, 1, 1) == 1.0

    def test_all_equal(self):
        assert four_point_delta(3, 3, 3, 3, 3, 3) == 0.0

    def test_infinite_skips(self):
        assert four_point_delta(1, np.inf, 2, 2, 3, 1) is None


class TestGraphDelta:
    def test_tree_is_zero(self):
        assert graph_delta(balanced_binary_tree(5), mode="exact") == 0.0

    def test_path_is_zero(self):
        assert graph_delta(path_graph(50), mode="exact") == 0.0

    def test_zachary_is_one(self, zachary):
        assert graph_delta(zachary, mode="exact") == 1.0

    def test_four_cycle(self):
        assert graph_delta(load_edge_list("a b\nb c\nc d\nd a"), mode="exact") == 1.0

    def test_sampled_lower_bounds_exact(self, zachary):
        exact = graph_delta(zachary, mode="exact")
        sampled = graph_delta(zachary, mode="sampled", n_samples=20000, seed=3)
        assert sampled <= exact
        assert sampled >= 0.0

    def test_sampled_deterministic(self, zachary):
        a = graph_delta(zachary, mode="sampled", n_samples=5000, seed=11)
        b = graph_delta(zachary, mode="sampled", n_samples=5000, seed=11)
        assert a == b

    def test_relabeling_invariant(self, zachary, rng):
        perm = rng.permutation(zachary.n_nodes)
        lines = []
        for u, nbrs in enumerate(zachary.adjacency):
            for v in nbrs:
                if u < v:
                    lines.append(f"n{perm[u]} n{perm[v]}")
        rng.shuffle(lines)
        shuffled = load_edge_list("\n".join(lines))
        assert graph_delta(shuffled, mode="exact") == graph_delta(zachary, mode="exact")

    def test_exact_cap_error(self):
        with pytest.raises(DataError, match="sampled"):
            graph_delta(path_graph(300), mode="exact")

    def test_disconnected_components_handled(self):
        # two 4-cycles, disconnected: quadruples across components skip
        net = load_edge_list("a b\nb c\nc d\nd a\nw x\nx y\ny z\nz w")
        assert graph_delta(net, mode="exact") == 1.0

    def test_small_graph_zero(self):
        assert graph_delta(load_edge_list("a b"), mode="exact") == 0.0
