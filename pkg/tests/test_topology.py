"""Graph construction, reachability, and mixing-weight validation."""

import numpy as np
import pytest

from bgan.errors import ConfigError
from bgan.topology import (
    CommGraph,
    MixingWeights,
    edgeless_graph,
    is_strongly_connected,
    load_graph,
    load_weights,
    proportional_weights,
    reachable_set,
    ring_graph,
    save_graph,
    save_weights,
    string_graph,
    uniform_weights,
)


def random_graph(rng, n, p=0.3):
    edges = {(j, i) for j in range(n) for i in range(n)
             if j != i and rng.random() < p}
    return CommGraph(n, frozenset(edges))


def power_reachable(g, i):
    """Reachability oracle via boolean adjacency powers."""
    A = np.zeros((g.n, g.n), dtype=np.int64)
    for j, k in g.edges:
        A[j, k] = 1
    closure = np.zeros_like(A)
    walk = np.eye(g.n, dtype=np.int64)
    for _ in range(g.n):
        walk = np.minimum(walk @ A, 1)
        closure |= walk
    return {j for j in range(g.n) if closure[j, i] and j != i}


class TestGraphs:
    def test_ring_basic(self):
        g = ring_graph(10, 1)
        assert len(g.edges) == 10
        assert g.in_neighbors(0) == (9,)
        assert g.out_neighbors(9) == (0,)
        assert is_strongly_connected(g)

    def test_ring_all_neighbors_is_complete(self):
        g = ring_graph(10, 9)
        assert len(g.edges) == 10 * 9
        assert g.in_neighbors(3) == tuple(j for j in range(10) if j != 3)

    def test_smallest_ring(self):
        g = ring_graph(2, 1)
        assert g.edges == frozenset({(0, 1), (1, 0)})

    def test_ring_rejects_bad_k(self):
        with pytest.raises(ConfigError):
            ring_graph(10, 0)
        with pytest.raises(ConfigError):
            ring_graph(10, 10)
        with pytest.raises(ConfigError):
            ring_graph(1, 1)

    def test_string_shape(self):
        g = string_graph(10)
        assert len(g.edges) == 9
        assert not is_strongly_connected(g)
        assert g.in_neighbors(0) == (1,)
        assert g.in_neighbors(9) == ()
        assert string_graph(2).edges == frozenset({(1, 0)})
        with pytest.raises(ConfigError):
            string_graph(1)

    def test_graph_validation(self):
        with pytest.raises(ConfigError):
            CommGraph(3, frozenset({(1, 1)}))
        with pytest.raises(ConfigError):
            CommGraph(3, frozenset({(0, 3)}))
        with pytest.raises(ConfigError):
            CommGraph(0, frozenset())

    def test_neighbor_lists_are_transposes(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(2, 10)))
            for i in range(g.n):
                for j in g.in_neighbors(i):
                    assert i in g.out_neighbors(j)
                for k in g.out_neighbors(i):
                    assert i in g.in_neighbors(k)


class TestReachability:
    def test_ring_reaches_everyone(self):
        g = ring_graph(10, 1)
        for i in range(10):
            assert reachable_set(g, i) == set(range(10)) - {i}

    def test_string_closure(self):
        g = string_graph(10)
        assert reachable_set(g, 0) == set(range(1, 10))
        assert reachable_set(g, 9) == set()
        assert reachable_set(g, 4) == set(range(5, 10))

    def test_one_way_pair_not_strongly_connected(self):
        g = CommGraph(2, frozenset({(0, 1)}))
        assert not is_strongly_connected(g)

    def test_edgeless_cases(self):
        g = edgeless_graph(4)
        assert g.edgeless
        assert not is_strongly_connected(g)
        assert reachable_set(g, 2) == set()
        assert is_strongly_connected(edgeless_graph(1))

    def test_invalid_agent_id(self):
        g = ring_graph(4, 1)
        with pytest.raises(ConfigError):
            reachable_set(g, 4)
        with pytest.raises(ConfigError):
            g.in_neighbors(-1)

    def test_against_matrix_power_oracle(self):
        """BFS reachability equals the adjacency-power closure on random digraphs."""
        rng = np.random.default_rng(99)
        for _ in range(40):
            n = int(rng.integers(2, 13))
            g = random_graph(rng, n, p=float(rng.uniform(0.1, 0.6)))
            for i in range(n):
                assert reachable_set(g, i) == power_reachable(g, i)
            full = all(power_reachable(g, i) == set(range(n)) - {i}
                       for i in range(n))
            assert is_strongly_connected(g) == full


class TestWeights:
    def test_uniform_ring(self):
        w = uniform_weights(ring_graph(10, 1))
        assert np.all(w.C == 0.5)
        for i in range(10):
            assert w.B[i, (i - 1) % 10] == 0.5

    def test_uniform_complete(self):
        w = uniform_weights(ring_graph(10, 9))
        assert np.allclose(w.C, 0.1)
        off = w.B[~np.eye(10, dtype=bool)]
        assert np.allclose(off, 0.1)

    def test_uniform_isolated_agent(self):
        w = uniform_weights(edgeless_graph(3))
        assert np.all(w.C == 1.0)
        assert np.all(w.B == 0.0)

    def test_proportional_symmetric(self):
        g = CommGraph(2, frozenset({(0, 1), (1, 0)}))
        w = proportional_weights(g, [100, 100])
        assert np.all(w.C == 0.5)
        assert w.B[0, 1] == 0.5 and w.B[1, 0] == 0.5

    def test_proportional_skewed(self):
        g = CommGraph(2, frozenset({(0, 1), (1, 0)}))
        w = proportional_weights(g, [300, 100])
        assert w.C[0] == 0.75 and w.B[0, 1] == 0.25
        assert w.C[1] == 0.25 and w.B[1, 0] == 0.75

    def test_proportional_rejects_bad_counts(self):
        g = ring_graph(3, 1)
        with pytest.raises(ConfigError):
            proportional_weights(g, [10, 0, 10])
        with pytest.raises(ConfigError):
            proportional_weights(g, [10, 10])

    def test_row_sums_on_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            g = random_graph(rng, int(rng.integers(2, 12)))
            counts = rng.integers(1, 500, size=g.n).tolist()
            for w in (uniform_weights(g), proportional_weights(g, counts)):
                rows = w.C + w.B.sum(axis=1)
                assert np.all(np.abs(rows - 1.0) <= 1e-12)

    def test_validation_rejects_zero_self_weight(self):
        g = CommGraph(2, frozenset({(0, 1), (1, 0)}))
        B = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ConfigError):
            MixingWeights(g, B, np.array([0.0, 0.0]))

    def test_validation_rejects_off_edge_support(self):
        g = CommGraph(2, frozenset({(1, 0)}))
        B = np.array([[0.0, 0.5], [0.5, 0.0]])
        with pytest.raises(ConfigError):
            MixingWeights(g, B, np.array([0.5, 0.5]))

    def test_validation_rejects_bad_row_sum(self):
        g = CommGraph(2, frozenset({(1, 0)}))
        B = np.array([[0.0, 0.4], [0.0, 0.0]])
        with pytest.raises(ConfigError):
            MixingWeights(g, B, np.array([0.5, 1.0]))

    def test_validation_rejects_negative(self):
        g = CommGraph(2, frozenset({(1, 0)}))
        B = np.array([[0.0, -0.1], [0.0, 0.0]])
        with pytest.raises(ConfigError):
            MixingWeights(g, B, np.array([1.1, 1.0]))


class TestFileFormats:
    def test_graph_round_trip(self, tmp_path):
        g = ring_graph(7, 2)
        path = tmp_path / "graph.txt"
        save_graph(g, path)
        assert load_graph(path) == g
        text = path.read_text().splitlines()
        assert text[0] == "agents 7"
        assert all(len(ln.split()) == 2 for ln in text[1:])

    def test_graph_file_errors(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("7 nodes\n")
        with pytest.raises(ConfigError):
            load_graph(path)
        path.write_text("agents 3\n0 1 2\n")
        with pytest.raises(ConfigError):
            load_graph(path)

    def test_weights_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 6, p=0.4)
        w = proportional_weights(g, rng.integers(1, 97, size=6).tolist())
        path = tmp_path / "weights.csv"
        save_weights(w, path)
        loaded = load_weights(path)
        assert loaded.graph == g
        assert np.array_equal(loaded.B, w.B)
        assert np.array_equal(loaded.C, w.C)

    def test_weights_row_layout(self, tmp_path):
        w = uniform_weights(ring_graph(3, 1))
        path = tmp_path / "weights.csv"
        save_weights(w, path)
        rows = path.read_text().splitlines()
        assert rows[0] == "0.5,2:0.5"
        assert rows[1] == "0.5,0:0.5"
