"""Finite metric spaces with optional graph-induced geodesic structure.

A :class:`FiniteMetricSpace` stores a validated, dense distance matrix over
a finite point set. When the metric was induced from a weighted graph the
adjacency is retained, shortest paths are the geodesics, and
:func:`minimal_geodesic` extracts a constant-speed discrete geodesic with a
deterministic (lexicographic) tie rule.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

METRIC_TOL = 1e-12


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the metric-axiom check on a square matrix."""

    ok: bool
    symmetry_violations: list
    diagonal_violations: list
    negativity_violations: list
    triangle_violations: list

    def summary(self) -> str:
        if self.ok:
            return "metric axioms hold"
        parts = []
        if self.diagonal_violations:
            parts.append(f"{len(self.diagonal_violations)} nonzero diagonal entries")
        if self.symmetry_violations:
            parts.append(f"{len(self.symmetry_violations)} asymmetric pairs")
        if self.negativity_violations:
            parts.append(f"{len(self.negativity_violations)} negative entries")
        if self.triangle_violations:
            parts.append(f"{len(self.triangle_violations)} triangle violations")
        return "; ".join(parts)


def validate_metric(dist, tol: float = METRIC_TOL) -> ValidationReport:
    """Check symmetry, zero diagonal, nonnegativity and triangle inequality.

    Returns a report listing the violating index pairs/triples. Raises
    ``ValueError`` on malformed input (non-square or non-finite entries).
    """
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix contains non-finite entries")
    n = D.shape[0]

    diag = [(i,) for i in range(n) if abs(D[i, i]) > tol]
    sym = [(i, j) for i in range(n) for j in range(i + 1, n) if abs(D[i, j] - D[j, i]) > tol]
    neg = [(i, j) for i in range(n) for j in range(n) if D[i, j] < -tol]

    # Triangle inequality via a vectorized sweep over the middle index.
    tri = []
    for j in range(n):
        # excess[i,k] > 0 means d(i,k) > d(i,j) + d(j,k)
        excess = D - (D[:, j][:, None] + D[j, :][None, :])
        bad = np.argwhere(excess > tol)
        tri.extend((int(i), j, int(k)) for i, k in bad)

    ok = not (diag or sym or neg or tri)
    return ValidationReport(ok, sym, diag, neg, tri)


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A finite point set with a dense, validated distance matrix.

    ``adjacency`` is the weighted edge dictionary the metric was induced
    from, when there is one; it is what makes geodesic extraction possible.
    Instances are immutable: the distance matrix is marked read-only.
    """

    points: tuple
    dist: np.ndarray
    adjacency: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        D = np.ascontiguousarray(np.asarray(self.dist, dtype=float))
        report = validate_metric(D)
        if not report.ok:
            raise ValueError(f"invalid metric: {report.summary()}")
        if len(self.points) != D.shape[0]:
            raise ValueError("point list length does not match distance matrix")
        D.flags.writeable = False
        object.__setattr__(self, "dist", D)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.size else 0.0

    def mesh(self) -> float:
        """Maximum edge length when graph-induced, else the smallest positive distance."""
        if self.adjacency is not None:
            longest = 0.0
            for u, nbrs in self.adjacency.items():
                for v, w in nbrs.items():
                    longest = max(longest, w)
            return longest
        return self.min_positive_distance()

    def min_positive_distance(self) -> float:
        off = self.dist[~np.eye(self.size, dtype=bool)]
        pos = off[off > 0]
        return float(pos.min()) if pos.size else 0.0

    def nearest_neighbor_radii(self) -> np.ndarray:
        """Per-point distance to the nearest distinct point (0 for a singleton)."""
        if self.size == 1:
            return np.zeros(1)
        D = self.dist + np.diag(np.full(self.size, np.inf))
        return D.min(axis=1)

    def to_csv(self, path: str) -> None:
        from ._csvio import write_csv

        write_csv(path, list(self.points), self.dist)


@dataclass(frozen=True)
class DiscretePath:
    """An ordered vertex sequence with cumulative arc length from its start."""

    vertices: tuple
    cumulative_length: tuple

    @property
    def length(self) -> float:
        return self.cumulative_length[-1]

    def parameters(self) -> np.ndarray:
        """Constant-speed parameters s_k = cumulative/total in [0, 1]."""
        cum = np.asarray(self.cumulative_length)
        if cum[-1] == 0.0:
            return np.zeros(len(cum))
        return cum / cum[-1]


def _as_adjacency(edges, n: int) -> dict:
    adj: dict = {i: {} for i in range(n)}
    for u, v, w in edges:
        if u == v:
            continue
        if w <= 0:
            raise ValueError(f"edge ({u},{v}) has nonpositive weight {w}")
        prev = adj[u].get(v)
        if prev is None or w < prev:
            adj[u][v] = w
            adj[v][u] = w
    return adj


def shortest_path_space(edges, n: int | None = None, points=None) -> FiniteMetricSpace:
    """Build the shortest-path metric of a weighted undirected graph.

    ``edges`` is an iterable of (u, v, weight) with 0-based integer vertex
    indices and positive weights. The graph must be connected; a
    disconnected graph would produce infinite distances and is rejected.
    """
    edges = [(int(u), int(v), float(w)) for u, v, w in edges]
    if n is None:
        n = 1 + max((max(u, v) for u, v, _ in edges), default=0)
    adj = _as_adjacency(edges, n)

    W = np.zeros((n, n))
    for u, nbrs in adj.items():
        for v, w in nbrs.items():
            W[u, v] = w
    D = dijkstra(csr_matrix(W), directed=False)
    if np.any(np.isinf(D)):
        raise ValueError("graph is disconnected; shortest-path metric would be infinite")
    D = (D + D.T) / 2.0  # symmetrize float noise
    if points is None:
        points = tuple(str(i) for i in range(n))
    return FiniteMetricSpace(points=tuple(points), dist=D, adjacency=adj)


def load_edge_list(path: str) -> FiniteMetricSpace:
    """Read a `u v w` edge-list text file (0-based indices, decimal weights)."""
    edges = []
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'u v w', got {line.strip()!r}")
            u, v, w = tokens
            edges.append((int(u), int(v), float(w)))
    if not edges:
        raise ValueError(f"{path}: empty edge list")
    return shortest_path_space(edges)


def minimal_geodesic(space: FiniteMetricSpace, x: int, y: int) -> DiscretePath:
    """Extract a shortest path from x to y as a constant-speed discrete path.

    Among all shortest vertex sequences the lexicographically smallest one
    is returned, so the choice is deterministic. Requires the space to be
    graph-induced. ``x == y`` yields the single-vertex path of length 0.
    """
    if space.adjacency is None:
        raise ValueError("minimal_geodesic requires a graph-induced space")
    n = space.size
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError(f"vertex index out of range: {x}, {y}")
    if x == y:
        return DiscretePath(vertices=(x,), cumulative_length=(0.0,))

    dist_y = space.dist[y]
    total = space.dist[x, y]
    tol = METRIC_TOL * max(1.0, total)

    # Greedy lexicographic walk: always step to the smallest-index neighbor
    # that stays on some shortest path (prefix-greedy = lex-min sequence).
    vertices = [x]
    cum = [0.0]
    current = x
    while current != y:
        best = None
        for nbr in sorted(space.adjacency[current]):
            w = space.adjacency[current][nbr]
            on_path = abs((total - cum[-1]) - (w + dist_y[nbr])) <= tol
            if on_path:
                best = (nbr, w)
                break
        if best is None:  # cannot happen on a valid shortest-path metric
            raise RuntimeError("geodesic extraction failed; inconsistent metric")
        current, w = best
        vertices.append(current)
        cum.append(cum[-1] + w)
    return DiscretePath(vertices=tuple(vertices), cumulative_length=tuple(cum))


def path_graph_space(n: int, length: float = 1.0) -> FiniteMetricSpace:
    """Uniform discretization of the segment [0, length] with n points."""
    if n < 1:
        raise ValueError("need at least one point")
    if n == 1:
        return FiniteMetricSpace(points=("0",), dist=np.zeros((1, 1)), adjacency={0: {}})
    h = length / (n - 1)
    edges = [(i, i + 1, h) for i in range(n - 1)]
    return shortest_path_space(edges, n=n)


def cycle_graph_space(n: int, circumference: float = 1.0) -> FiniteMetricSpace:
    """Uniform discretization of a circle of given circumference (n >= 3)."""
    if n < 3:
        raise ValueError("a discrete circle needs at least 3 points")
    h = circumference / n
    edges = [(i, (i + 1) % n, h) for i in range(n)]
    return shortest_path_space(edges, n=n)
