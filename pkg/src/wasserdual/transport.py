"""Exact optimal transport on finite spaces.

The solver is a transportation-specialized primal simplex: northwest-corner
start, MODI pricing, cycle pivoting on the basis tree, and a Bland fallback
that kicks in after a run of degenerate pivots so cycling cannot occur.
Vertex optimality gives exact plans and exact dual potentials, which the
duality diagnostics downstream depend on.

W_infinity is a bottleneck problem and is solved by binary search over the
distinct entries of the distance matrix with a max-flow feasibility check
on the thresholded bipartite graph.
"""

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .metric import FiniteMetricSpace
from .slope import ScalarField, lipschitz_constant

MASS_TOL = 1e-12
MARGINAL_TOL = 1e-10
_FLOW_EPS = 1e-14


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights over the points of a finite metric space."""

    space: FiniteMetricSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if w.ndim != 1 or w.size != self.space.size:
            raise ValueError("weight vector length must match the point count")
        if np.any(w < -MASS_TOL):
            raise ValueError("negative mass")
        if abs(w.sum() - 1.0) > MASS_TOL * max(1.0, w.size):
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w = np.clip(w, 0.0, None)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0.0)

    def integrate(self, f: ScalarField) -> float:
        _check_same_space(self.space, f.space)
        return float(self.weights @ f.values)

    def to_csv(self, path: str) -> None:
        from ._csvio import write_csv

        write_csv(path, ["index", "weight"], [(i, w) for i, w in enumerate(self.weights)])


def dirac(space: FiniteMetricSpace, index: int) -> DiscreteMeasure:
    w = np.zeros(space.size)
    w[index] = 1.0
    return DiscreteMeasure(space, w)


def measure_from_csv(space: FiniteMetricSpace, path: str) -> DiscreteMeasure:
    from ._csvio import read_csv_rows

    _, rows = read_csv_rows(path)
    w = np.zeros(space.size)
    for idx, val in rows:
        w[int(idx)] = float(val)
    return DiscreteMeasure(space, w)


@dataclass(frozen=True)
class Coupling:
    """A joint distribution with prescribed marginals."""

    matrix: np.ndarray
    row_marginal: DiscreteMeasure
    col_marginal: DiscreteMeasure

    def __post_init__(self):
        M = np.ascontiguousarray(np.asarray(self.matrix, dtype=float))
        if M.shape != (self.row_marginal.weights.size, self.col_marginal.weights.size):
            raise ValueError("coupling shape does not match marginals")
        if np.any(M < -MARGINAL_TOL):
            raise ValueError("coupling has negative entries")
        M = np.clip(M, 0.0, None)
        if np.max(np.abs(M.sum(axis=1) - self.row_marginal.weights)) > MARGINAL_TOL:
            raise ValueError("row sums do not match the first marginal")
        if np.max(np.abs(M.sum(axis=0) - self.col_marginal.weights)) > MARGINAL_TOL:
            raise ValueError("column sums do not match the second marginal")
        M.flags.writeable = False
        object.__setattr__(self, "matrix", M)

    def cost_lp(self, dist: np.ndarray, p: float) -> float:
        """L^p(pi) norm of the distance, with the max factored out for stability."""
        mask = self.matrix > 0.0
        if not mask.any():
            return 0.0
        d = dist[mask]
        m = self.matrix[mask]
        dmax = d.max()
        if dmax == 0.0:
            return 0.0
        return float(dmax * (m @ (d / dmax) ** p) ** (1.0 / p))

    def ess_sup(self, dist: np.ndarray, mass_tol: float = 0.0) -> float:
        mask = self.matrix > mass_tol
        return float(dist[mask].max()) if mask.any() else 0.0

    def to_csv(self, path: str) -> None:
        from ._csvio import write_csv

        rows = [(i, j, self.matrix[i, j]) for i, j in zip(*np.nonzero(self.matrix))]
        write_csv(path, ["i", "j", "mass"], rows)


@dataclass(frozen=True)
class DualPotentials:
    """A feasible Kantorovich pair: f on the target side, f_star on the source side.

    Feasibility means f_star(x) <= f(y) + d(x,y)^p for every pair, and is
    checked on construction.
    """

    f: ScalarField
    f_star: ScalarField
    p: float

    def __post_init__(self):
        dist = self.f.space.dist
        cost = dist**self.p
        slack = self.f.values[None, :] + cost - self.f_star.values[:, None]
        worst = float(slack.min())
        if worst < -1e-8 * max(1.0, np.abs(self.f.values).max(), np.abs(self.f_star.values).max()):
            raise ValueError(f"infeasible dual pair, worst slack {worst}")

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return mu.integrate(self.f_star) - nu.integrate(self.f)


def _check_same_space(a: FiniteMetricSpace, b: FiniteMetricSpace) -> None:
    if a is not b and not (a.points == b.points and np.array_equal(a.dist, b.dist)):
        raise ValueError("objects live on different spaces")


# ---------------------------------------------------------------------------
# Transportation simplex
# ---------------------------------------------------------------------------


def _northwest_corner(a, b):
    """Initial basic feasible solution with exactly m + n - 1 basic cells.

    Generic over the scalar type (doubles or Fractions).
    """
    m, n = len(a), len(b)
    a_rem = list(a)
    b_rem = list(b)
    cells = []
    alloc = []
    i = j = 0
    while True:
        q = min(a_rem[i], b_rem[j])
        cells.append((i, j))
        alloc.append(q)
        a_rem[i] -= q
        b_rem[j] -= q
        if i == m - 1 and j == n - 1:
            break
        # Exactly one of row/column advances per step (degenerate steps allowed).
        if i < m - 1 and (a_rem[i] <= b_rem[j] or j == n - 1):
            i += 1
        else:
            j += 1
    return cells, alloc


class _BasisTree:
    """Spanning tree of basic cells over row nodes 0..m-1 and column nodes m..m+n-1."""

    def __init__(self, m: int, n: int, cells, alloc):
        self.m = m
        self.n = n
        self.alloc = dict(zip(cells, alloc))
        self.adj = {k: set() for k in range(m + n)}
        for (i, j) in cells:
            self.adj[i].add(m + j)
            self.adj[m + j].add(i)

    def duals(self, C):
        """Potentials with u[0] = 0 solving u_i + v_j = C[i][j] on basic cells.

        Returns plain lists so the arithmetic type of C (float or Fraction)
        is preserved.
        """
        m, n = self.m, self.n
        u = [None] * m
        v = [None] * n
        u[0] = 0 * C[0][0]
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for nbr in sorted(self.adj[node]):
                if node < m:
                    i, j = node, nbr - m
                    if v[j] is None:
                        v[j] = C[i][j] - u[i]
                        queue.append(nbr)
                else:
                    i, j = nbr, node - m
                    if u[i] is None:
                        u[i] = C[i][j] - v[j]
                        queue.append(nbr)
        return u, v

    def cycle(self, i: int, j: int):
        """Unique tree path from row node i to column node m+j, as basis cells."""
        m = self.m
        target = m + j
        parent = {i: None}
        queue = deque([i])
        while queue:
            node = queue.popleft()
            if node == target:
                break
            for nbr in sorted(self.adj[node]):
                if nbr not in parent:
                    parent[nbr] = node
                    queue.append(nbr)
        path_nodes = [target]
        while parent[path_nodes[-1]] is not None:
            path_nodes.append(parent[path_nodes[-1]])
        path_nodes.reverse()  # i ... m+j
        cells = []
        for a, b in zip(path_nodes, path_nodes[1:]):
            if a < m:
                cells.append((a, b - m))
            else:
                cells.append((b, a - m))
        return cells

    def pivot(self, entering, cycle_cells, theta, leaving):
        # Entering gains theta; walking the tree path from the entering
        # cell's row end alternates -, +, -, ... on the existing basis cells.
        zero = theta - theta  # zero of the active scalar type
        self.alloc[entering] = self.alloc.get(entering, zero) + theta
        for k, cell in enumerate(cycle_cells):
            if k % 2 == 0:
                self.alloc[cell] -= theta
            else:
                self.alloc[cell] += theta
        del self.alloc[leaving]
        li, lj = leaving
        self.adj[li].discard(self.m + lj)
        self.adj[self.m + lj].discard(li)
        ei, ej = entering
        self.adj[ei].add(self.m + ej)
        self.adj[self.m + ej].add(ei)
        # Clamp float dust (a no-op under exact arithmetic).
        for cell, q in list(self.alloc.items()):
            if q < zero:
                self.alloc[cell] = zero


def _transportation_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Solve min <C, X> over the transportation polytope; return (X, u, v).

    The returned X is a vertex of the polytope and (u, v) are optimal duals
    for the constraints sum_j X[i,j] = a[i] and sum_i X[i,j] = b[j],
    normalized by u[0] = 0.
    """
    m, n = C.shape
    cells, alloc = _northwest_corner(list(a), list(b))
    tree = _BasisTree(m, n, cells, alloc)
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-13 * scale
    degenerate_streak = 0
    bland = False
    max_iter = 200 * (m + n) ** 2 + 1000

    for _ in range(max_iter):
        u, v = (np.asarray(w, dtype=float) for w in tree.duals(C))
        R = C - u[:, None] - v[None, :]
        if bland:
            neg = np.argwhere(R < -tol)
            if neg.size == 0:
                break
            ei, ej = map(int, neg[0])
        else:
            flat = int(np.argmin(R))
            ei, ej = divmod(flat, n)
            if R[ei, ej] >= -tol:
                break
        cycle_cells = tree.cycle(ei, ej)
        minus_cells = cycle_cells[0::2]
        theta = min(tree.alloc[c] for c in minus_cells)
        leaving = min(c for c in minus_cells if tree.alloc[c] <= theta)
        tree.pivot((ei, ej), cycle_cells, theta, leaving)
        if theta <= 0.0:
            degenerate_streak += 1
            if degenerate_streak > m + n + 10:
                bland = True
        else:
            degenerate_streak = 0
            bland = False
    else:
        raise RuntimeError("transportation simplex failed to terminate")

    X = np.zeros((m, n))
    for (i, j), q in tree.alloc.items():
        X[i, j] = q
    u, v = (np.asarray(w, dtype=float) for w in tree.duals(C))
    return X, u, v, sorted(tree.alloc.keys())


def _tree_allocation(cells, a, b):
    """Exact basic solution carried by a spanning-tree cell set, by leaf
    stripping; returns None if some allocation is negative (infeasible basis)."""
    m, n = len(a), len(b)
    remaining = set(cells)
    a_rem = list(a)
    b_rem = list(b)
    alloc = {}
    while remaining:
        row_count = {}
        col_count = {}
        for i, j in remaining:
            row_count[i] = row_count.get(i, 0) + 1
            col_count[j] = col_count.get(j, 0) + 1
        leaf = None
        for cell in remaining:
            i, j = cell
            if row_count[i] == 1:
                leaf = (cell, "row")
                break
            if col_count[j] == 1:
                leaf = (cell, "col")
                break
        if leaf is None:
            return None
        (i, j), kind = leaf
        q = a_rem[i] if kind == "row" else b_rem[j]
        if q < 0:
            return None
        alloc[(i, j)] = q
        a_rem[i] -= q
        b_rem[j] -= q
        remaining.discard((i, j))
    return alloc


_EXACT_COST_BITS = 1130  # doubles are m * 2^e with e >= -1074; this keeps all bits


def _transportation_simplex_exact(a_fr, b_fr, C_int, warm_cells=None):
    """Exact-arithmetic simplex for cost matrices whose entries span more
    orders of magnitude than double pricing can certify (large p).

    Costs are integers (the doubles scaled by 2^_EXACT_COST_BITS, exactly),
    so pricing is big-int arithmetic; allocations are Fractions. Bland's
    rule guarantees finite termination and the optimum is exact. A
    warm-start basis (typically the double-precision optimum) usually cuts
    the pivot count to a handful. Returns float (X, u, v) with the duals
    scaled back down.
    """
    m, n = len(a_fr), len(b_fr)
    tree = None
    if warm_cells is not None and len(warm_cells) == m + n - 1:
        alloc = _tree_allocation(warm_cells, a_fr, b_fr)
        if alloc is not None:
            tree = _BasisTree(m, n, list(alloc.keys()), list(alloc.values()))
    if tree is None:
        cells, alloc_list = _northwest_corner(a_fr, b_fr)
        tree = _BasisTree(m, n, cells, alloc_list)
    max_iter = 500 * (m + n) ** 2 + 1000

    for _ in range(max_iter):
        u, v = tree.duals(C_int)
        entering = None
        for i in range(m):
            ci = C_int[i]
            ui = u[i]
            for j in range(n):
                if ci[j] - ui < v[j]:
                    entering = (i, j)
                    break
            if entering:
                break
        if entering is None:
            break
        cycle_cells = tree.cycle(*entering)
        minus_cells = cycle_cells[0::2]
        theta = min(tree.alloc[c] for c in minus_cells)
        leaving = min(c for c in minus_cells if tree.alloc[c] <= theta)
        tree.pivot(entering, cycle_cells, theta, leaving)
    else:
        raise RuntimeError("exact transportation simplex failed to terminate")

    X = np.zeros((m, n))
    for (i, j), q in tree.alloc.items():
        X[i, j] = float(q)
    u, v = tree.duals(C_int)
    down = Fraction(1, 1 << _EXACT_COST_BITS)
    u_f = np.array([float(x * down) for x in u])
    v_f = np.array([float(x * down) for x in v])
    return X, u_f, v_f


def _solve_on_support(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: np.ndarray, exact: bool = False):
    """Drop zero-mass points, run the simplex, reinsert zero rows/columns."""
    rows = mu.support
    cols = nu.support
    a = mu.weights[rows]
    b = nu.weights[cols]
    sub = cost[np.ix_(rows, cols)]
    if exact:
        # Warm start from the double-precision optimum's basis.
        af = a * (1.0 / a.sum())
        bf = b * (1.0 / b.sum())
        _, _, _, warm = _transportation_simplex(af, bf, sub)
        sa = sum(Fraction(float(x)) for x in a)
        sb = sum(Fraction(float(x)) for x in b)
        a_fr = [Fraction(float(x)) / sa for x in a]
        b_fr = [Fraction(float(x)) / sb for x in b]
        lift = 1 << _EXACT_COST_BITS
        C_int = [[int(Fraction(float(c)) * lift) for c in row] for row in sub]
        Xs, us, vs = _transportation_simplex_exact(a_fr, b_fr, C_int, warm_cells=warm)
    else:
        # The simplex expects equal totals; renormalize the float dust.
        a = a * (1.0 / a.sum())
        b = b * (1.0 / b.sum())
        Xs, us, vs, _ = _transportation_simplex(a, b, sub)
    n_all = mu.space.size
    X = np.zeros((n_all, n_all))
    X[np.ix_(rows, cols)] = Xs
    return X, (rows, us), (cols, vs)


def wasserstein_p(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: float,
    dist: np.ndarray | None = None,
    return_duals: bool = False,
):
    """Exact L^p transport distance (1 <= p < inf) and an optimal plan.

    The LP is solved with cost (d/dmax)^p and the value rescaled, so large p
    stays inside double range. With ``return_duals`` the optimal potentials
    of the cost-d^p problem are also returned as a :class:`DualPotentials`
    (target-side f normalized to f[first support point] = 0, extended off
    the supports so the pair is feasible on the whole space).
    """
    _check_same_space(mu.space, nu.space)
    if not (p >= 1.0 and math.isfinite(p)):
        raise ValueError(f"p must be a finite real >= 1, got {p}")
    D = mu.space.dist if dist is None else np.asarray(dist, dtype=float)

    dmax = float(D.max())
    if dmax == 0.0:
        plan = Coupling(np.outer(mu.weights, nu.weights), mu, nu)
        if return_duals:
            zero = ScalarField(mu.space, np.zeros(mu.space.size))
            return 0.0, plan, DualPotentials(zero, zero, p)
        return 0.0, plan

    cost_scaled = (D / dmax) ** p
    # Double pricing cannot certify optimality once the scaled costs span
    # more than ~8 decades (the p-th root then amplifies the stopping gap),
    # so such instances go through the rational-arithmetic simplex.
    sub = cost_scaled[np.ix_(mu.support, nu.support)]
    positive = sub[sub > 0.0]
    exact = bool(positive.size) and float(positive.min()) < 1e-8
    X, (rows, us), (cols, vs) = _solve_on_support(mu, nu, cost_scaled, exact=exact)
    value_p = float(np.sum(X[np.ix_(rows, cols)] * cost_scaled[np.ix_(rows, cols)]))
    value = dmax * max(value_p, 0.0) ** (1.0 / p)
    plan = Coupling(X, mu, nu)
    if not return_duals:
        return value, plan

    # Rescale duals back to cost d^p and extend to the full space:
    #   f = -v on supp(nu); elsewhere the tightest value induced by u,
    #   f_star = the c-transform of f (pointwise exact), so the pair is
    #   feasible everywhere and attains the primal value on (mu, nu).
    scale_back = dmax**p
    n_all = mu.space.size
    cost = D**p
    u_full = np.full(n_all, -np.inf)
    u_full[rows] = us * scale_back
    f_vals = np.full(n_all, np.nan)
    f_vals[cols] = -vs * scale_back
    off = np.setdiff1d(np.arange(n_all), cols)
    if off.size:
        f_vals[off] = np.max(u_full[rows][:, None] - cost[np.ix_(rows, off)], axis=0)
    f_vals -= f_vals[cols[0]]
    f = ScalarField(mu.space, f_vals)
    f_star = c_transform(f, p)
    return value, plan, DualPotentials(f, f_star, p)


def wasserstein_uniform_assignment(
    points_cost: np.ndarray, p: float
) -> float:
    """Exact W_p between two uniform measures of equal support size.

    ``points_cost`` is the (m, m) ground-distance matrix between the two
    supports. For uniform weights the transport LP has an optimal vertex
    that is a permutation (Birkhoff), so an assignment solver returns the
    exact value. Used by Monte Carlo harnesses that need thousands of
    solves; agrees with :func:`wasserstein_p` and is cross-checked in tests.
    """
    D = np.asarray(points_cost, dtype=float)
    m = D.shape[0]
    if D.shape != (m, m):
        raise ValueError("uniform assignment route needs a square cost matrix")
    dmax = float(D.max())
    if dmax == 0.0:
        return 0.0
    r, c = linear_sum_assignment((D / dmax) ** p)
    return float(dmax * (np.sum((D[r, c] / dmax) ** p) / m) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Bottleneck (p = infinity)
# ---------------------------------------------------------------------------


class _Dinic:
    def __init__(self, n: int):
        self.n = n
        self.to = []
        self.cap = []
        self.head = [[] for _ in range(n)]

    def add_edge(self, u: int, v: int, c: float):
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(c)
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0.0)

    def max_flow(self, s: int, t: int) -> float:
        flow = 0.0
        while True:
            level = [-1] * self.n
            level[s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for eid in self.head[u]:
                    v = self.to[eid]
                    if self.cap[eid] > _FLOW_EPS and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                return flow
            it = [0] * self.n

            def dfs(u: int, pushed: float) -> float:
                if u == t:
                    return pushed
                while it[u] < len(self.head[u]):
                    eid = self.head[u][it[u]]
                    v = self.to[eid]
                    if self.cap[eid] > _FLOW_EPS and level[v] == level[u] + 1:
                        got = dfs(v, min(pushed, self.cap[eid]))
                        if got > 0.0:
                            self.cap[eid] -= got
                            self.cap[eid ^ 1] += got
                            return got
                    it[u] += 1
                return 0.0

            while True:
                pushed = dfs(s, math.inf)
                if pushed <= 0.0:
                    break
                flow += pushed


def _feasible_flow(a: np.ndarray, b: np.ndarray, allowed: np.ndarray):
    """Max flow through the allowed bipartite pairs; returns (flow, plan)."""
    m, n = allowed.shape
    s, t = m + n, m + n + 1
    net = _Dinic(m + n + 2)
    for i in range(m):
        net.add_edge(s, i, float(a[i]))
    for j in range(n):
        net.add_edge(m + j, t, float(b[j]))
    pair_edges = {}
    for i, j in zip(*np.nonzero(allowed)):
        eid = len(net.to)
        net.add_edge(int(i), m + int(j), math.inf)
        pair_edges[(int(i), int(j))] = eid
    flow = net.max_flow(s, t)
    plan = np.zeros((m, n))
    for (i, j), eid in pair_edges.items():
        plan[i, j] = net.cap[eid ^ 1]  # flow pushed = reverse capacity
    return flow, plan


def wasserstein_inf(
    mu: DiscreteMeasure, nu: DiscreteMeasure, dist: np.ndarray | None = None
):
    """Bottleneck transport distance: minimal essential sup of d over couplings.

    Binary search over the sorted distinct distances between the supports;
    a threshold is feasible iff the bipartite graph restricted to pairs with
    d <= threshold carries a full feasibility flow (within 1e-12 slack).
    The value is always an entry of the distance matrix.
    """
    _check_same_space(mu.space, nu.space)
    D = mu.space.dist if dist is None else np.asarray(dist, dtype=float)
    rows = mu.support
    cols = nu.support
    a = mu.weights[rows]
    b = nu.weights[cols]
    sub = D[np.ix_(rows, cols)]
    levels = np.unique(sub)

    def feasible(threshold: float):
        flow, plan = _feasible_flow(a, b, sub <= threshold)
        return flow >= 1.0 - 1e-12, plan

    lo, hi = 0, len(levels) - 1
    ok_hi, plan_hi = feasible(levels[hi])
    if not ok_hi:  # cannot happen for probability marginals
        raise RuntimeError("no feasible coupling at the diameter threshold")
    best_plan = plan_hi
    while lo < hi:
        mid = (lo + hi) // 2
        ok, plan = feasible(levels[mid])
        if ok:
            hi = mid
            best_plan = plan
        else:
            lo = mid + 1
    value = float(levels[hi])

    n_all = mu.space.size
    X = np.zeros((n_all, n_all))
    X[np.ix_(rows, cols)] = best_plan
    # Flow arithmetic leaves ~1e-15 dust on the marginals; rescale rows.
    row_sums = X.sum(axis=1)
    fix = row_sums > 0
    X[fix] *= (mu.weights[fix] / row_sums[fix])[:, None]
    return value, Coupling(X, mu, nu)


# ---------------------------------------------------------------------------
# Duality
# ---------------------------------------------------------------------------


def c_transform(f: ScalarField, p: float) -> ScalarField:
    """Pointwise exact inf-convolution f*(y) = min_x { f(x) + d(x,y)^p }."""
    cost = f.space.dist**p
    return ScalarField(f.space, np.min(f.values[:, None] + cost, axis=0))


def kantorovich_gap(
    mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, f: ScalarField
) -> float:
    """W_p(mu, nu)^p minus the dual value of (c_transform(f), f); >= 0 up to float."""
    value, _ = wasserstein_p(mu, nu, p)
    f_star = c_transform(f, p)
    dual = mu.integrate(f_star) - nu.integrate(f)
    return value**p - dual


def rubinstein_value(
    mu: DiscreteMeasure, nu: DiscreteMeasure, f: ScalarField, tol: float = 1e-12
) -> float:
    """Dual functional int f dmu - int f dnu for a 1-Lipschitz witness.

    Rejects f whose measured Lipschitz constant exceeds 1 + tol, reporting
    the measured constant.
    """
    lip = lipschitz_constant(f)
    if lip > 1.0 + tol:
        raise ValueError(f"witness is not 1-Lipschitz: measured constant {lip}")
    return mu.integrate(f) - nu.integrate(f)


def optimal_lipschitz_witness(mu: DiscreteMeasure, nu: DiscreteMeasure) -> ScalarField:
    """A globally 1-Lipschitz witness attaining W_1, built from the LP duals.

    g(z) = min over support(nu) of { -v_j + d(z, y_j) } is 1-Lipschitz as a
    minimum of cones, dominates the source potential on support(mu), and is
    dominated by -v on support(nu), so its dual value equals W_1.
    """
    _, _, duals = wasserstein_p(mu, nu, 1.0, return_duals=True)
    cols = nu.support
    D = mu.space.dist
    g = np.min(duals.f.values[cols][None, :] + D[:, cols], axis=1)
    return ScalarField(mu.space, g)


def glue_couplings(pi: Coupling, family: dict) -> Coupling:
    """Compose a coupling with a family of conditional couplings.

    ``family`` maps support pairs (i, j) of ``pi`` to couplings of
    (P_i, P_j). The result sum_{ij} pi[i,j] * family[i,j] couples the glued
    marginals, and its p-th power cost is the pi-average of the family's
    p-th power costs (checked in tests as an exact arithmetic identity).
    """
    support = list(zip(*np.nonzero(pi.matrix)))
    if not support:
        raise ValueError("empty coupling")
    first = family.get((int(support[0][0]), int(support[0][1])))
    if first is None:
        raise ValueError(f"missing family entry for support pair {support[0]}")
    n = first.matrix.shape[0]
    glued = np.zeros((n, first.matrix.shape[1]))
    row_w = np.zeros(n)
    col_w = np.zeros(first.matrix.shape[1])
    for i, j in support:
        key = (int(i), int(j))
        if key not in family:
            raise ValueError(f"missing family entry for support pair {key}")
        block = family[key]
        glued += pi.matrix[i, j] * block.matrix
        row_w += pi.matrix[i, j] * block.row_marginal.weights
        col_w += pi.matrix[i, j] * block.col_marginal.weights
    space = first.row_marginal.space
    return Coupling(glued, DiscreteMeasure(space, row_w), DiscreteMeasure(space, col_w))


def wp_limit_sequence(
    mu: DiscreteMeasure, nu: DiscreteMeasure, p_list, dist: np.ndarray | None = None
):
    """W_p along an increasing list of exponents (switching to W_inf past 300)."""
    p_list = list(p_list)
    if any(nxt < prev for nxt, prev in zip(p_list[1:], p_list)) or any(p < 1 for p in p_list):
        raise ValueError("p_list must be nondecreasing with entries >= 1")
    values = []
    for p in p_list:
        if p > 300:  # d^p overflows doubles; the bottleneck limit takes over
            value, _ = wasserstein_inf(mu, nu, dist)
        else:
            value, _ = wasserstein_p(mu, nu, p, dist)
        values.append(value)
    return values
