"""Shared generators for randomized graph/weight/distribution instances."""

import numpy as np

from bgan.equilibrium import DistVector
from bgan.topology import CommGraph, MixingWeights


def random_digraph(rng, n, p=0.3):
    edges = {(j, i) for j in range(n) for i in range(n)
             if j != i and rng.random() < p}
    return CommGraph(n, frozenset(edges))


def random_valid_weights(rng, graph):
    """Random mixing weights with a healthy margin on every self-weight."""
    n = graph.n
    B = np.zeros((n, n))
    C = np.zeros(n)
    for i in range(n):
        nbrs = graph.in_neighbors(i)
        raw_self = rng.uniform(0.3, 1.0)
        raw = rng.uniform(0.05, 1.0, size=len(nbrs))
        total = raw_self + raw.sum()
        C[i] = raw_self / total
        for j, r in zip(nbrs, raw):
            B[i, j] = r / total
    return MixingWeights(graph, B, C)


def random_dist(rng, k, grid=None):
    v = rng.exponential(size=k) + 1e-12
    return DistVector(v / v.sum(), grid)


def random_instance(rng, n_max=10, k_max=100, p=0.35):
    """One (weights, per-agent data distributions) problem instance."""
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(2, k_max + 1))
    graph = random_digraph(rng, n, p)
    weights = random_valid_weights(rng, graph)
    p_data = [random_dist(rng, k, grid="shared") for _ in range(n)]
    return weights, p_data
