import math

import numpy as np
import pytest

from wasserdual import (
    PowerLagrangian,
    ScalarField,
    hj_residual,
    hopf_lax,
    hopf_lax_lipschitz_bound,
    legendre,
    lipschitz_constant,
    path_graph_space,
    semigroup_defect,
    shortest_path_space,
)
from wasserdual.hopf_lax import (
    hopf_lax_minimizers,
    shrinking_time_threshold,
    young_inequality_margin,
)
from conftest import random_geodesic_space


def numeric_conjugate(L, s, w_max=10.0, step=1e-5):
    """Independent oracle: brute-force sup of w*s - L(w) over a w-grid."""
    w = np.arange(0.0, w_max, step)
    return float.__float__(np.max(w * s - L(w)))


def test_lagrangian_requires_p_above_one():
    with pytest.raises(ValueError):
        PowerLagrangian(1.0)


def test_legendre_values():
    L2 = PowerLagrangian(2.0)
    assert legendre(L2, 0.0) == 0.0
    assert legendre(L2, 3.0) == 4.5  # q = 2: 3^2 / 2
    L3 = PowerLagrangian(3.0)
    # q = 3/2: 2^{3/2} * 2/3, frozen from the numeric sup below
    assert legendre(L3, 2.0) == pytest.approx(1.8856180831641267, abs=1e-12)
    assert legendre(L3, 2.0) == pytest.approx(numeric_conjugate(L3, 2.0), abs=1e-4)


def test_legendre_rejects_negative():
    with pytest.raises(ValueError):
        legendre(PowerLagrangian(2.0), -1.0)


def test_young_inequality_grid():
    for p in (1.5, 2.0, 3.0):
        L = PowerLagrangian(p)
        margin = young_inequality_margin(L, np.linspace(0, 3, 40), np.linspace(0, 3, 40))
        assert margin >= -1e-9
        # equality at b = a^{p-1}
        a = 1.37
        assert L(a) + L.conjugate(a ** (p - 1.0)) - a * a ** (p - 1.0) == pytest.approx(0.0, abs=1e-12)


def test_hopf_lax_constant_field():
    sp = path_graph_space(5)
    f = ScalarField(sp, np.full(5, 2.5))
    q = hopf_lax(f, 0.3, PowerLagrangian(2.0))
    assert np.allclose(q.values, 2.5)


def test_hopf_lax_two_point_example():
    sp = shortest_path_space([(0, 1, 1.0)])
    f = ScalarField(sp, [0.0, 10.0])
    q = hopf_lax(f, 1.0, PowerLagrangian(2.0))
    assert np.allclose(q.values, [0.0, 0.5])


def test_hopf_lax_time_zero_is_identity():
    sp = path_graph_space(4)
    f = ScalarField(sp, [0.0, 1.0, -1.0, 2.0])
    assert np.array_equal(hopf_lax(f, 0.0, PowerLagrangian(2.0)).values, f.values)
    with pytest.raises(ValueError):
        hopf_lax(f, -0.1, PowerLagrangian(2.0))


def test_hopf_lax_sandwich(rng):
    sp = random_geodesic_space(rng, n=9)
    f = ScalarField(sp, rng.uniform(-2, 2, sp.size))
    L = PowerLagrangian(2.0)
    for t in (0.01, 0.1, 1.0, 10.0):
        q = hopf_lax(f, t, L).values
        assert np.all(q <= f.values + 1e-15)
        assert np.all(q >= f.values.min() - 1e-15)


def test_hopf_lax_monotone_in_time(rng):
    sp = random_geodesic_space(rng, n=8)
    f = ScalarField(sp, rng.uniform(-2, 2, sp.size))
    L = PowerLagrangian(1.5)
    prev = hopf_lax(f, 0.01, L).values
    for t in (0.05, 0.2, 1.0, 5.0):
        cur = hopf_lax(f, t, L).values
        assert np.all(cur <= prev + 1e-14)
        prev = cur


def test_hopf_lax_short_time_minimizer_is_self(rng):
    sp = random_geodesic_space(rng, n=8)
    f = ScalarField(sp, rng.uniform(-2, 2, sp.size))
    L = PowerLagrangian(2.0)
    t_small = 0.5 * shrinking_time_threshold(f, L)
    mins = hopf_lax_minimizers(f, t_small, L)
    assert np.array_equal(mins, np.arange(sp.size))
    assert np.allclose(hopf_lax(f, t_small, L).values, f.values)


def test_semigroup_defect_constant_field():
    sp = path_graph_space(20)
    f = ScalarField(sp, np.zeros(20))
    assert semigroup_defect(f, 0.1, 0.1, PowerLagrangian(2.0)) == 0.0


def test_semigroup_defect_two_point_reported():
    sp = shortest_path_space([(0, 1, 1.0)])
    f = ScalarField(sp, [0.0, 1.0])
    d = semigroup_defect(f, 0.2, 0.2, PowerLagrangian(2.0))
    assert d >= 0.0  # not geodesic at scale; value only reported


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_semigroup_defect_path_graph(p):
    defects = {}
    for n in (50, 100, 200):
        sp = path_graph_space(n)
        x = sp.dist[0]
        f = ScalarField(sp, 0.3 * np.sin(2 * np.pi * x) + 0.2 * x)
        defects[n] = semigroup_defect(f, 0.1, 0.1, PowerLagrangian(p))
    assert defects[200] <= defects[50] + 1e-12
    assert defects[200] <= 5.0 / 199.0


def test_hj_residual_constant_zero():
    sp = path_graph_space(30)
    f = ScalarField(sp, np.ones(30))
    r = hj_residual(f, 0.1, PowerLagrangian(2.0), 1e-3)
    assert np.allclose(r.values, 0.0)


def test_hj_residual_linear_field_interior():
    # f(x) = x: away from the clamp region Q_t f = x - t/2 and the
    # time derivative -1/2 cancels L*(slope) = L*(1) = 1/2.
    n, sigma = 200, 1e-3
    sp = path_graph_space(n)
    x = sp.dist[0]
    f = ScalarField(sp, x.copy())
    t = 0.1
    r = hj_residual(f, t, PowerLagrangian(2.0), sigma)
    h = 1.0 / (n - 1)
    interior = x >= 2 * (t + sigma)
    assert np.abs(r.values[interior]).max() <= 10.0 * (h + sigma)


def test_hj_forward_difference_is_nonpositive(rng):
    sp = path_graph_space(50)
    f = ScalarField(sp, rng.uniform(0, 1, 50))
    L = PowerLagrangian(2.0)
    t, sigma = 0.05, 1e-3
    q_t = hopf_lax(f, t, L).values
    q_ts = hopf_lax(f, t + sigma, L).values
    assert np.all(q_ts <= q_t + 1e-15)


def test_lipschitz_bound_constant_field():
    sp = path_graph_space(10)
    f = ScalarField(sp, np.zeros(10))
    measured, bound = hopf_lax_lipschitz_bound(f, PowerLagrangian(2.0))
    assert measured == 0.0 and bound == 0.0


def test_lipschitz_bound_formula():
    sp = path_graph_space(100)
    f = ScalarField(sp, sp.dist[0])  # Lipschitz constant 1
    measured, bound = hopf_lax_lipschitz_bound(f, PowerLagrangian(2.0))
    assert bound == pytest.approx(max(1.0, 0.5))
    assert measured <= bound + 2.0 / 99.0


def test_lipschitz_bound_scaling():
    sp = path_graph_space(60)
    f = ScalarField(sp, sp.dist[0])
    g = 2.0 * f
    _, bound_f = hopf_lax_lipschitz_bound(f, PowerLagrangian(2.0))
    _, bound_g = hopf_lax_lipschitz_bound(g, PowerLagrangian(2.0))
    assert lipschitz_constant(g) == pytest.approx(2.0 * lipschitz_constant(f))
    assert bound_g == pytest.approx(max(2.0, legendre(PowerLagrangian(2.0), 2.0)))


def test_lipschitz_bound_respected(rng):
    sp = path_graph_space(80)
    x = sp.dist[0]
    f = ScalarField(sp, 0.4 * np.sin(2 * np.pi * x))
    measured, bound = hopf_lax_lipschitz_bound(f, PowerLagrangian(2.0))
    h = 1.0 / 79.0
    lip = lipschitz_constant(f)
    assert measured <= bound + 2.0 * (lip + 1.0) * h


def test_semigroup_inequality_direction(rng):
    # Q_t Q_s >= Q_{t+s} on any finite space (convexity of the Lagrangian).
    sp = random_geodesic_space(rng, n=7)
    f = ScalarField(sp, rng.uniform(-1, 1, sp.size))
    L = PowerLagrangian(2.0)
    lhs = hopf_lax(hopf_lax(f, 0.1, L), 0.2, L).values
    rhs = hopf_lax(f, 0.3, L).values
    assert np.all(lhs >= rhs - 1e-12)
