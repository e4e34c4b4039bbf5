"""Directed communication graphs and brainstorming mixture weights.

An edge (j, i) means agent j sends generated samples to agent i, so j is an
in-neighbor of i.  Mixing weights attach a row to each receiving agent: the
weight pi_i it puts on its own data plus a weight pi_ij for every
in-neighbor j, summing to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CommGraph:
    """Immutable digraph over agents 0..n-1."""

    n: int
    edges: frozenset  # of (sender, receiver) pairs

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("agent count must be >= 1")
        object.__setattr__(self, "edges", frozenset(
            (int(j), int(i)) for j, i in self.edges))
        for j, i in self.edges:
            if j == i:
                raise ConfigError(f"self-loop on agent {i}")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ConfigError(f"edge ({j}, {i}) out of range for n={self.n}")

    def in_neighbors(self, i: int) -> tuple:
        """Agents whose ideas agent i receives."""
        self._check_id(i)
        return tuple(sorted(j for j, k in self.edges if k == i))

    def out_neighbors(self, j: int) -> tuple:
        """Agents that agent j sends its ideas to."""
        self._check_id(j)
        return tuple(sorted(i for k, i in self.edges if k == j))

    def in_degree(self, i: int) -> int:
        return len(self.in_neighbors(i))

    @property
    def edgeless(self) -> bool:
        return not self.edges

    def _check_id(self, i):
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self.n):
            raise ConfigError(f"invalid agent id {i!r} for n={self.n}")


def ring_graph(n: int, k: int) -> CommGraph:
    """Each agent receives from its k predecessors around a directed ring."""
    if n < 2:
        raise ConfigError("ring needs n >= 2")
    if not (1 <= k <= n - 1):
        raise ConfigError(f"ring degree k={k} must satisfy 1 <= k <= n-1")
    edges = {((i - m) % n, i) for i in range(n) for m in range(1, k + 1)}
    return CommGraph(n, frozenset(edges))


def string_graph(n: int) -> CommGraph:
    """A directed chain: agent i receives from agent i+1, the last from nobody."""
    if n < 2:
        raise ConfigError("string needs n >= 2")
    return CommGraph(n, frozenset((i + 1, i) for i in range(n - 1)))


def edgeless_graph(n: int) -> CommGraph:
    """n isolated agents; training on this graph is plain standalone training."""
    return CommGraph(n, frozenset())


def _scc_count(g: CommGraph) -> int:
    """Number of strongly connected components (two-pass DFS)."""
    fwd = [[] for _ in range(g.n)]
    rev = [[] for _ in range(g.n)]
    for j, i in g.edges:
        fwd[j].append(i)
        rev[i].append(j)

    order = []
    seen = [False] * g.n
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        stack = [(start, iter(fwd[start]))]
        while stack:
            v, it = stack[-1]
            for w in it:
                if not seen[w]:
                    seen[w] = True
                    stack.append((w, iter(fwd[w])))
                    break
            else:
                order.append(v)
                stack.pop()

    comp = [-1] * g.n
    count = 0
    for v in reversed(order):
        if comp[v] != -1:
            continue
        comp[v] = count
        stack = [v]
        while stack:
            u = stack.pop()
            for w in rev[u]:
                if comp[w] == -1:
                    comp[w] = count
                    stack.append(w)
        count += 1
    return count


def is_strongly_connected(g: CommGraph) -> bool:
    """True iff every agent is reachable from every other agent."""
    return _scc_count(g) == 1


def reachable_set(g: CommGraph, i: int) -> set:
    """Agents j != i whose ideas can reach agent i along a directed path."""
    g._check_id(i)
    reached = set()
    frontier = [i]
    while frontier:
        nxt = []
        for v in frontier:
            for j, k in g.edges:
                if k == v and j not in reached and j != i:
                    reached.add(j)
                    nxt.append(j)
        frontier = nxt
    return reached


@dataclass(eq=False)
class MixingWeights:
    """Per-receiver convex weights over {own data} + in-neighbor ideas.

    B[i][j] is the weight agent i gives ideas from j; C[i] is the weight on
    its own data.  Every row satisfies C[i] + sum_j B[i][j] = 1, B is
    supported only on graph edges, and C[i] > 0 throughout (that strict
    margin is what makes I - B invertible).
    """

    graph: CommGraph
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        n = self.graph.n
        self.B = np.asarray(self.B, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        if self.B.shape != (n, n):
            raise ConfigError(f"B must be {n}x{n}, got {self.B.shape}")
        if self.C.shape != (n,):
            raise ConfigError(f"C must have length {n}, got {self.C.shape}")
        if np.any(self.B < 0) or np.any(self.C < 0):
            raise ConfigError("mixing weights must be nonnegative")
        if np.any(self.C <= 0):
            bad = int(np.argmin(self.C))
            raise ConfigError(
                f"agent {bad} has zero self-weight; every agent must keep a "
                f"strictly positive share of its own data, which is what keeps "
                f"the mixing system strictly diagonally dominant and solvable"
            )
        for i in range(n):
            allowed = set(self.graph.in_neighbors(i))
            support = set(np.nonzero(self.B[i])[0].tolist())
            stray = support - allowed
            if stray:
                raise ConfigError(
                    f"agent {i} has weight on {sorted(stray)} without an edge"
                )
            row_sum = self.C[i] + self.B[i].sum()
            if abs(row_sum - 1.0) > ROW_SUM_TOL:
                raise ConfigError(
                    f"agent {i} weight row sums to {row_sum!r}, expected 1"
                )

    @property
    def n(self) -> int:
        return self.graph.n


def uniform_weights(g: CommGraph) -> MixingWeights:
    """Equal weight on own data and each in-neighbor: 1 / (in_degree + 1)."""
    B = np.zeros((g.n, g.n))
    C = np.zeros(g.n)
    for i in range(g.n):
        nbrs = g.in_neighbors(i)
        w = 1.0 / (len(nbrs) + 1)
        C[i] = w
        for j in nbrs:
            B[i, j] = w
    return MixingWeights(g, B, C)


def proportional_weights(g: CommGraph, sample_counts) -> MixingWeights:
    """Weights proportional to each source agent's real-sample count."""
    counts = [int(c) for c in sample_counts]
    if len(counts) != g.n:
        raise ConfigError(f"need {g.n} sample counts, got {len(counts)}")
    if any(c <= 0 for c in counts):
        raise ConfigError("all sample counts must be positive")
    B = np.zeros((g.n, g.n))
    C = np.zeros(g.n)
    for i in range(g.n):
        nbrs = g.in_neighbors(i)
        total = counts[i] + sum(counts[j] for j in nbrs)
        C[i] = counts[i] / total
        for j in nbrs:
            B[i, j] = counts[j] / total
    return MixingWeights(g, B, C)


def save_graph(g: CommGraph, path) -> None:
    """Edge-list file: `agents <n>` header, then one `sender receiver` per line."""
    lines = [f"agents {g.n}"]
    lines.extend(f"{j} {i}" for j, i in sorted(g.edges))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> CommGraph:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("agents "):
        raise ConfigError(f"{path}: missing `agents <n>` header")
    try:
        n = int(lines[0].split()[1])
        edges = frozenset(tuple(int(t) for t in ln.split()) for ln in lines[1:])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed edge list: {exc}") from exc
    if any(len(e) != 2 for e in edges):
        raise ConfigError(f"{path}: edges must be `sender receiver` pairs")
    return CommGraph(n, edges)


def save_weights(w: MixingWeights, path) -> None:
    """CSV with one row per receiving agent: own weight, then `j:pi_ij` pairs.

    Zero-weight edges are kept so the graph round-trips through the file.
    """
    rows = []
    for i in range(w.n):
        cells = [f"{w.C[i]:.17g}"]
        cells.extend(f"{j}:{w.B[i, j]:.17g}" for j in w.graph.in_neighbors(i))
        rows.append(",".join(cells))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + "\n")


def load_weights(path) -> MixingWeights:
    with open(path, "r", encoding="ascii") as fh:
        rows = [ln.strip() for ln in fh if ln.strip()]
    n = len(rows)
    B = np.zeros((n, n))
    C = np.zeros(n)
    edges = set()
    for i, row in enumerate(rows):
        cells = row.split(",")
        try:
            C[i] = float(cells[0])
            for cell in cells[1:]:
                j_txt, pi_txt = cell.split(":")
                j = int(j_txt)
                B[i, j] = float(pi_txt)
                edges.add((j, i))
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: malformed weights row {i}: {exc}") from exc
    return MixingWeights(CommGraph(n, frozenset(edges)), B, C)
