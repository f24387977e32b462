"""Harness measuring the two best constants of a Markov kernel and comparing them.

For a kernel P on a finite metric space and conjugate exponents p, q:

* K_C(p): the smallest K such that W_p(P_x, P_y) <= K d(x, y) on a list of
  point pairs (Dirac pairs suffice; gluing lifts the bound to arbitrary
  marginals, which is cross-checked separately).
* K_G(q): the smallest K such that the slope of Pf at each point is at most
  K times the P_x-average q-norm of the slope of f, maximized over a
  function corpus (global Lipschitz constants when q is infinite).

The two constants agree in the continuum; here the agreement is measured
at the mesh scale, together with several diagnostics that retrace the
inequality chain connecting them.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hopf_lax import PowerLagrangian, hopf_lax
from .kernels import MarkovKernel, apply
from .metric import FiniteMetricSpace, minimal_geodesic
from .slope import ScalarField, lipschitz_constant, local_slope, mcshane_extension, slope_at_scale
from .transport import (
    DiscreteMeasure,
    glue_couplings,
    wasserstein_inf,
    wasserstein_p,
    wasserstein_uniform_assignment,
)

_RATIO_EPS = 1e-13


def thread_count() -> int:
    """Worker cap from WASSER_DUAL_THREADS (0 or unset = auto).

    Auto resolves to serial: the exact solvers are GIL-bound Python, so
    threading only pays off when the caller opts in explicitly.
    """
    raw = os.environ.get("WASSER_DUAL_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return 1 if k <= 0 else k


def parallel_map(fn, items):
    """Order-preserving map, threaded when the env cap allows it."""
    items = list(items)
    k = thread_count()
    if k <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(k, len(items))) as pool:
        return list(pool.map(fn, items))


def conjugate_exponent(p: float) -> float:
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    return p / (p - 1.0)


# ---------------------------------------------------------------------------
# Wasserstein-control constant
# ---------------------------------------------------------------------------


def pair_distance_ratio(P: MarkovKernel, x: int, y: int, p: float) -> float:
    """W_p(P_x, P_y) / d(x, y) for one Dirac pair."""
    d = float(P.space.dist[x, y])
    if d <= 0.0:
        raise ValueError("pairs must consist of distinct points")
    mu = P.point_measure(x)
    nu = P.point_measure(y)
    if math.isinf(p) or p > 300:
        value, _ = wasserstein_inf(mu, nu)
    else:
        value, _ = wasserstein_p(mu, nu, p)
    return value / d


def best_constant_Cp(P: MarkovKernel, p: float, pairs) -> float:
    """Max over pairs of W_p(P_x, P_y) / d(x, y)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty pair list")
    ratios = parallel_map(lambda xy: pair_distance_ratio(P, xy[0], xy[1], p), pairs)
    return float(max(ratios))


def default_pairs(space: FiniteMetricSpace, max_pairs: int = 24, seed: int = 0):
    """Deterministic pair list: graph edges first, then a spread of far pairs.

    Adjacent pairs pin down the slope-scale behavior of the control
    constant; the far pairs guard against long-range surprises.
    """
    n = space.size
    if n < 2:
        raise ValueError("need at least two points")
    pairs = []
    if space.adjacency is not None:
        edges = sorted({(min(u, v), max(u, v)) for u, nbrs in space.adjacency.items() for v in nbrs})
        step = max(1, len(edges) // max(1, max_pairs // 2))
        pairs.extend(edges[::step][: max_pairs // 2])
    shifts = sorted({max(1, round(n * frac)) for frac in (0.06, 0.12, 0.25, 0.37, 0.5)})
    for s in shifts:
        if s < n and (0, s) not in pairs:
            pairs.append((0, s % n) if s % n != 0 else (0, 1))
    rng = np.random.default_rng(seed)
    while len(pairs) < min(max_pairs, n * (n - 1) // 2):
        i, j = sorted(map(int, rng.choice(n, size=2, replace=False)))
        if (i, j) not in pairs and space.dist[i, j] > 0:
            pairs.append((i, j))
        if len(pairs) >= max_pairs:
            break
    return [pq for pq in pairs if space.dist[pq[0], pq[1]] > 0][:max_pairs]


# ---------------------------------------------------------------------------
# Gradient-estimate constant
# ---------------------------------------------------------------------------


def _slope_values(f: ScalarField, scale) -> np.ndarray:
    if scale is None or scale == "nearest":
        return local_slope(f).values
    return slope_at_scale(f, float(scale)).values


def gradient_ratios(P: MarkovKernel, f: ScalarField, q: float, scale=None) -> np.ndarray:
    """Pointwise ratios slope(Pf)(x) / (P slope(f)^q)(x)^{1/q} (NaN where 0/0)."""
    pf = apply(P, f)
    num = _slope_values(pf, scale)
    sf = _slope_values(f, scale)
    if math.isinf(q):
        den = np.full_like(num, float(sf.max()))
    else:
        den = (P.rows @ sf**q) ** (1.0 / q)
    out = np.full_like(num, np.nan)
    ok = den > _RATIO_EPS
    out[ok] = num[ok] / den[ok]
    out[(~ok) & (num > _RATIO_EPS)] = np.inf
    return out


def best_constant_Gq(P: MarkovKernel, q: float, corpus, scale=None) -> float:
    """Max over the corpus of the gradient-estimate ratio.

    For finite q the max runs over (f, x); for q = infinity it is the ratio
    of global Lipschitz constants Lip(Pf) / Lip(f).
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    lips = [lipschitz_constant(f) for f in corpus]
    if max(lips) <= _RATIO_EPS:
        raise ValueError("corpus contains only constant fields")

    best = 0.0
    for f, lip in zip(corpus, lips):
        if lip <= _RATIO_EPS:
            continue
        if math.isinf(q):
            best = max(best, lipschitz_constant(apply(P, f)) / lip)
        else:
            ratios = gradient_ratios(P, f, q, scale)
            finite = ratios[np.isfinite(ratios)]
            if np.any(np.isinf(ratios)):
                return math.inf
            if finite.size:
                best = max(best, float(finite.max()))
    return best


def corpus_adequacy(P: MarkovKernel, q: float, corpus, extra, scale=None) -> float:
    """Relative increase of K_G when ``extra`` fields join the corpus."""
    base = best_constant_Gq(P, q, corpus, scale)
    enlarged = best_constant_Gq(P, q, list(corpus) + list(extra), scale)
    return (enlarged - base) / base if base > 0 else math.inf


# ---------------------------------------------------------------------------
# Function corpus
# ---------------------------------------------------------------------------


def distance_cones(space: FiniteMetricSpace, count: int = 6):
    """1-Lipschitz cones d(x0, .) at evenly spread roots; the extremizers."""
    roots = np.unique(np.linspace(0, space.size - 1, num=min(count, space.size)).astype(int))
    return [ScalarField(space, space.dist[r].copy()) for r in roots]


def fourier_modes(space: FiniteMetricSpace, count: int = 4):
    """Normalized circular harmonics; assumes points are an evenly spaced cycle."""
    n = space.size
    u = np.arange(n) / n
    fields = []
    for k in range(1, count + 1):
        omega = 2.0 * math.pi * k
        fields.append(ScalarField(space, np.sin(omega * u) / omega))
        fields.append(ScalarField(space, np.cos(omega * u) / omega))
    return fields


def random_lipschitz_fields(space: FiniteMetricSpace, count: int, rng) -> list:
    """Random 1-Lipschitz fields via McShane extension of random anchor data."""
    n = space.size
    fields = []
    for _ in range(count):
        k = int(min(n, max(2, rng.integers(2, max(3, n // 4 + 1)))))
        anchors = rng.choice(n, size=k, replace=False)
        values = rng.uniform(-1.0, 1.0, size=k) * space.diameter
        fields.append(mcshane_extension(space, anchors, values))
    return fields


def smoothed_fields(space: FiniteMetricSpace, count: int, rng, p: float = 2.0) -> list:
    """Inf-convolution smoothings of rough random fields."""
    L = PowerLagrangian(p)
    t = 4.0 * max(space.mesh(), 1e-9)
    out = []
    for _ in range(count):
        raw = ScalarField(space, rng.uniform(-1.0, 1.0, size=space.size))
        out.append(hopf_lax(raw, t, L))
    return out


def build_corpus(
    space: FiniteMetricSpace,
    seed: int = 0,
    cones: int = 6,
    fourier: int = 4,
    random_fields: int = 6,
    smoothed: int = 3,
    include_fourier: bool | None = None,
):
    """Assemble the test corpus; Fourier modes only on cycle-like spaces."""
    rng = np.random.default_rng(seed)
    corpus = distance_cones(space, cones)
    if include_fourier is None:
        include_fourier = space.adjacency is not None and all(
            len(nbrs) == 2 for nbrs in space.adjacency.values()
        ) and space.size >= 3
    if include_fourier and fourier > 0:
        corpus += fourier_modes(space, fourier)
    corpus += random_lipschitz_fields(space, random_fields, rng)
    corpus += smoothed_fields(space, smoothed, rng)
    return [f for f in corpus if lipschitz_constant(f) > _RATIO_EPS]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class DualityReport:
    """Measured constants and margins for one kernel and one exponent."""

    p: float
    q: float
    K_C: float
    K_G: float
    mesh: float
    pair_margins: np.ndarray
    fn_margin_min: float
    reconstruction_error: float
    gap_tol: float
    mc_ci: float | None = None
    pairs: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return abs(self.K_C - self.K_G)

    @property
    def gap_ok(self) -> bool:
        tol = self.gap_tol + (self.mc_ci or 0.0)
        return self.gap <= tol


def fundamental_identity_error(
    P: MarkovKernel, f: ScalarField, x: int, y: int, p: float
) -> float:
    """Reconstruction error of the path identity behind the duality proof.

    Along the constant-speed geodesic gamma from y to x, the curve
    s -> P(Q_s f)(gamma_s) is differentiated numerically and the derivative
    integrated back with the trapezoid rule; the result is compared with
    P(Q_1 f)(x) - P f(y). Returns the absolute mismatch.
    """
    if not (1.0 < p < math.inf):
        raise ValueError("the path identity uses a finite exponent p > 1")
    L = PowerLagrangian(p)
    path = minimal_geodesic(P.space, y, x)
    s = path.parameters()
    if len(path.vertices) < 3:
        return 0.0
    F = np.array(
        [
            apply(P, hopf_lax(f, float(sk), L)).values[v]
            for sk, v in zip(s, path.vertices)
        ]
    )
    dF = np.gradient(F, s)
    reconstructed = float(np.trapezoid(dF, s))
    return abs(reconstructed - (F[-1] - F[0]))


def duality_gap_report(
    P: MarkovKernel,
    p: float,
    pairs,
    corpus,
    scale=None,
    gap_tol: float = 0.05,
    diagnostic_field: ScalarField | None = None,
    strict: bool = False,
) -> DualityReport:
    """Measure K_C(p) and K_G(q) and compare them.

    ``pair_margins`` holds the slack K_C d(x,y) - W_p(P_x, P_y) per pair
    (nonnegative up to float noise by construction of K_C). The
    reconstruction error retraces the integral identity along a geodesic
    for the first usable pair. With ``strict`` a gap above ``gap_tol``
    raises AssertionError.
    """
    pairs = list(pairs)
    q = conjugate_exponent(p)
    ratios = parallel_map(lambda xy: pair_distance_ratio(P, xy[0], xy[1], p), pairs)
    K_C = float(max(ratios))
    K_G = best_constant_Gq(P, q, corpus, scale)
    dists = np.array([P.space.dist[i, j] for i, j in pairs])
    pair_margins = K_C * dists - np.array(ratios) * dists

    fn_margin = math.inf
    if K_C > 0:
        fn_margin = implication_margins(P, p, K_C, corpus, scale).min()

    recon = math.nan
    if P.space.adjacency is not None and 1.0 < p < math.inf and diagnostic_field is not None:
        far = max(pairs, key=lambda xy: P.space.dist[xy[0], xy[1]])
        recon = fundamental_identity_error(P, diagnostic_field, far[1], far[0], p)

    report = DualityReport(
        p=p,
        q=q,
        K_C=K_C,
        K_G=K_G,
        mesh=P.space.mesh(),
        pair_margins=pair_margins,
        fn_margin_min=float(fn_margin),
        reconstruction_error=recon,
        gap_tol=gap_tol,
        pairs=pairs,
    )
    if strict and not report.gap_ok:
        raise AssertionError(
            f"duality gap |K_C - K_G| = {report.gap} exceeds {gap_tol} at p = {p}"
        )
    return report


def implication_margins(
    P: MarkovKernel, p: float, K: float, corpus, scale=None
) -> np.ndarray:
    """Gradient-estimate margins with the rescaled metric K d injected.

    For finite p the margin at (f, x) is
    (P slope(f)^q)(x)^{1/q} - slope(Pf)(x) / K, with q conjugate to p; for
    p = infinity it is the L^1 version (q = 1). Lip-based margins are used
    when q is infinite (p = 1). All margins should be >= -tolerance when K
    is a certified control constant.
    """
    q = conjugate_exponent(p)
    margins = []
    for f in corpus:
        pf = apply(P, f)
        if math.isinf(q):
            margins.append(np.array([lipschitz_constant(f) - lipschitz_constant(pf) / K]))
            continue
        num = _slope_values(pf, scale)
        sf = _slope_values(f, scale)
        den = (P.rows @ sf**q) ** (1.0 / q)
        margins.append(den - num / K)
    return np.concatenate(margins)


def winf_support_excess(P: MarkovKernel, pairs, K: float) -> float:
    """Max over pairs of (largest distance on the optimal bottleneck plan's
    support) minus K d(x, y); <= 0 certifies the almost-sure distance bound."""
    worst = -math.inf
    for x, y in pairs:
        _, plan = wasserstein_inf(P.point_measure(x), P.point_measure(y))
        sup_d = plan.ess_sup(P.space.dist)
        worst = max(worst, sup_d - K * float(P.space.dist[x, y]))
    return worst


def chebyshev_split_margin(
    P: MarkovKernel, p: float, pairs, f: ScalarField, K: float
) -> float:
    """Minimum margin of the two-term split bound on |Pf(x) - Pf(y)|.

    The split takes the radius r = (K d(x,y))^{1/(2q)}: quotients inside
    the r-ball are charged to the L^q norm of the r-slope under P_x, the
    far mass to a Chebyshev tail, giving
    |Pf(x)-Pf(y)| <= ||G_r||_{L^q(P_x)} Kd + 2 ||f||_inf (Kd)^{1+(p-1)/2}.
    """
    if not (1.0 < p < math.inf):
        raise ValueError("the split bound needs 1 < p < inf")
    q = conjugate_exponent(p)
    pf = apply(P, f)
    sup_f = f.sup_norm()
    worst = math.inf
    for x, y in pairs:
        dt = K * float(P.space.dist[x, y])
        if dt <= 0:
            continue
        r = dt ** (1.0 / (2.0 * q))
        g_r = slope_at_scale(f, r).values
        lhs = abs(pf.values[x] - pf.values[y])
        rhs = (P.rows[x] @ g_r**q) ** (1.0 / q) * dt + 2.0 * sup_f * dt ** (1.0 + (p - 1.0) / 2.0)
        worst = min(worst, rhs - lhs)
    return worst


def g_infty_prime_margins(
    P: MarkovKernel, corpus, K: float, scale=None, support_tol: float = 1e-12
) -> np.ndarray:
    """Margins of the support-restricted sup bound on the slope of Pf.

    Per (f, x): (max of slope(f) over the support of P_x) minus
    slope(Pf)(x) / K. Nonnegative margins certify the strengthened
    infinity-form of the gradient estimate.
    """
    margins = []
    for f in corpus:
        pf = apply(P, f)
        num = _slope_values(pf, scale) / K
        sf = _slope_values(f, scale)
        ess = np.array(
            [sf[P.rows[x] > support_tol].max() if (P.rows[x] > support_tol).any() else 0.0
             for x in range(P.space.size)]
        )
        margins.append(ess - num)
    return np.concatenate(margins)


def monotonicity_audit(P: MarkovKernel, pairs, p_list):
    """Per-pair W_p table over increasing p, with the bottleneck value last.

    Returns (rows, K_C list): rows are [x, y, d, W_{p1}, ..., W_inf].
    """
    pairs = list(pairs)
    p_list = list(p_list)
    if any(nxt < prev for nxt, prev in zip(p_list[1:], p_list)):
        raise ValueError("p_list must be nondecreasing")
    rows = []
    for x, y in pairs:
        mu = P.point_measure(x)
        nu = P.point_measure(y)
        values = []
        for p in p_list:
            if p > 300:
                v, _ = wasserstein_inf(mu, nu)
            else:
                v, _ = wasserstein_p(mu, nu, p)
            values.append(v)
        v_inf, _ = wasserstein_inf(mu, nu)
        rows.append([x, y, float(P.space.dist[x, y])] + values + [v_inf])
    K_C = []
    for k, p in enumerate(p_list):
        K_C.append(max(row[3 + k] / row[2] for row in rows))
    return rows, K_C


def gluing_consistency(
    P: MarkovKernel, mu: DiscreteMeasure, nu: DiscreteMeasure, p: float
):
    """Check the kernel-composition transport bound through explicit gluing.

    Uses the optimal plan pi of (mu, nu), couples each support pair through
    the optimal plan of (P_x, P_y), glues, and returns
    (lhs, glued_cost, rhs) with lhs = W_p(P* mu, P* nu),
    glued_cost the L^p cost of the glued coupling and
    rhs = (sum pi(x,y) W_p(P_x, P_y)^p)^{1/p}. Always lhs <= glued_cost and
    glued_cost == rhs up to float arithmetic.
    """
    from .kernels import adjoint_apply

    _, pi = wasserstein_p(mu, nu, p)
    family = {}
    rhs_p = 0.0
    D = P.space.dist
    for i, j in zip(*np.nonzero(pi.matrix)):
        value, plan = wasserstein_p(P.point_measure(int(i)), P.point_measure(int(j)), p)
        family[(int(i), int(j))] = plan
        rhs_p += pi.matrix[i, j] * value**p
    glued = glue_couplings(pi, family)
    lhs, _ = wasserstein_p(adjoint_apply(P, mu), adjoint_apply(P, nu), p)
    glued_cost = glued.cost_lp(D, p)
    return lhs, glued_cost, rhs_p ** (1.0 / p)


# ---------------------------------------------------------------------------
# Sampled (Monte Carlo) kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalControl:
    """Control-constant estimate for one start pair of a sampled kernel."""

    p: float
    k_hat: float
    ci_lo: float
    ci_hi: float
    thinning_spread: float

    @property
    def halfwidth(self) -> float:
        return max(self.k_hat - self.ci_lo, self.ci_hi - self.k_hat)

    def overlaps(self, other: "EmpiricalControl") -> bool:
        return self.ci_lo <= other.ci_hi and other.ci_lo <= self.ci_hi


def empirical_control_constant(
    cost: np.ndarray,
    base_distance: float,
    p: float,
    n_boot: int = 200,
    seed: int = 0,
    thinning_costs=(),
) -> EmpiricalControl:
    """Bootstrap estimate of W_p(cloud_x, cloud_y) / base_distance.

    ``cost`` is the ground-distance matrix between two equal-size uniform
    supports (thinned clouds); the point estimate is the exact assignment
    value. Bootstrap resamples both supports with replacement; the CI is
    the 2.5/97.5 percentile range widened by the spread over alternative
    support selections (``thinning_costs``: other thinning offsets,
    replication halves), which carries the uncertainty the within-support
    bootstrap cannot see.
    """
    m = cost.shape[0]
    k_hat = wasserstein_uniform_assignment(cost, p) / base_distance
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        ia = rng.integers(0, m, size=m)
        ib = rng.integers(0, m, size=m)
        boots[b] = wasserstein_uniform_assignment(cost[np.ix_(ia, ib)], p) / base_distance
    lo, hi = np.percentile(boots, [2.5, 97.5])
    spread = 0.0
    for alt in thinning_costs:
        spread = max(spread, abs(wasserstein_uniform_assignment(alt, p) / base_distance - k_hat))
    return EmpiricalControl(p, float(k_hat), float(lo) - spread, float(hi) + spread, spread)
