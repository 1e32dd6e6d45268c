import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hcsolve import irk
from hcsolve.exceptions import NewtonError

SQ3 = math.sqrt(3.0)


class Cubic:
    """u' = -u**3 as a nonlinear right-hand side."""

    is_affine = False

    def __call__(self, u, t):
        return -u**3

    def jacobian(self, u, t):
        return np.diag(-3 * u**2)


class Forcing:
    """Affine right-hand side g(t) = cos(t)."""

    is_affine = True

    def __call__(self, u, t):
        return np.full_like(u, math.cos(t))

    def jacobian(self, u, t):
        return None


def test_gauss_tableaus():
    t1 = irk.gauss_tableau(1)
    np.testing.assert_allclose(t1.a, [[0.5]])
    np.testing.assert_allclose(t1.b, [1.0])
    np.testing.assert_allclose(t1.c, [0.5])
    t2 = irk.gauss_tableau(2)
    np.testing.assert_allclose(t2.c, [0.5 - SQ3 / 6, 0.5 + SQ3 / 6], atol=1e-15)
    np.testing.assert_allclose(t2.b, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(t2.a, [[0.25, 0.25 - SQ3 / 6], [0.25 + SQ3 / 6, 0.25]], atol=1e-15)
    for q in (1, 2, 3):
        t = irk.gauss_tableau(q)
        np.testing.assert_allclose(t.a.sum(axis=1), t.c, atol=1e-14)
        assert abs(t.b.sum() - 1) < 1e-14 and np.all(t.b > 0)
        # quadrature exact to degree 2q - 1
        for k in range(2 * q):
            assert abs(t.b @ t.c**k - 1 / (k + 1)) < 1e-13
    with pytest.raises(ValueError):
        irk.gauss_tableau(4)


def test_tableau_validation():
    with pytest.raises(ValueError):
        irk.IRKTableau(np.array([[0.5]]), np.array([0.9]), np.array([0.5]))
    with pytest.raises(ValueError):
        irk.NewtonControl(abs_tol=0)


def test_dahlquist_one_step():
    z = -0.1
    ref = (1 + z / 2 + z * z / 12) / (1 - z / 2 + z * z / 12)
    u = irk.step(np.eye(1), None, np.array([1.0]), 0.0, 0.1)
    assert abs(u[0] - ref) < 1e-12
    # local error of the rational approximant itself is 1.2575e-8
    assert abs((u[0] - math.exp(-0.1)) - (ref - math.exp(-0.1))) < 1e-12
    assert abs(u[0] - math.exp(-0.1)) < 1.3e-8


def test_order_slope():
    errs = []
    for dt in (0.2, 0.1, 0.05, 0.025):
        u = np.array([1.0])
        for k in range(round(1 / dt)):
            u = irk.step(sp.identity(1, format="csr"), None, u, k * dt, dt)
        errs.append(abs(u[0] - math.exp(-1)))
    slopes = np.diff(np.log2(errs)) * -1
    assert np.all((slopes > 3.7) & (slopes < 4.3))


def test_cubic_against_closed_form():
    u = np.array([1.0])
    for k in range(10):
        u = irk.step(None, Cubic(), u, 0.1 * k, 0.1)
    assert abs(u[0] - 3 ** -0.5) < 1e-6


def test_b_stability_smoke():
    u, v = np.array([1.0]), np.array([0.3])
    gap = abs(u - v)[0]
    for k in range(20):
        u = irk.step(None, Cubic(), u, 0.1 * k, 0.1)
        v = irk.step(None, Cubic(), v, 0.1 * k, 0.1)
        assert abs(u - v)[0] <= gap + 1e-15
        gap = abs(u - v)[0]


def test_affine_one_iteration():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    a = a @ a.T + np.eye(6)
    stepper = irk.IRKStepper()
    u, info = stepper.step(a, Forcing(), rng.standard_normal(6), 0.0, 0.1)
    assert info.iterations == 1 and info.residual < 1e-10


def test_forced_linear_system_accuracy():
    # u' = -u + cos t, u(0)=0: u = (cos t + sin t - e^{-t}) / 2
    u = np.zeros(1)
    for k in range(10):
        u = irk.step(np.eye(1), Forcing(), u, 0.1 * k, 0.1)
    ref = 0.5 * (math.cos(1) + math.sin(1) - math.exp(-1))
    assert abs(u[0] - ref) < 1e-7


def test_small_dt_consistency():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    u = np.array([1.0, -1.0])
    dt = 1e-8
    new = irk.step(a, None, u, 0.0, dt)
    np.testing.assert_allclose((new - u) / dt, -a @ u, rtol=1e-6)


def test_sparse_dense_and_matrix_free_agree():
    rng = np.random.default_rng(3)
    m = sp.random(40, 40, density=0.1, random_state=4)
    a = (m @ m.T + sp.identity(40)).tocsr()
    u = rng.standard_normal(40)

    class Op:
        shape = a.shape

        def matvec(self, v):
            return a @ v

    x = irk.step(a, Cubic(), u, 0.0, 0.1)
    y = irk.step(a.toarray(), Cubic(), u, 0.0, 0.1)
    z = irk.step(Op(), Cubic(), u, 0.0, 0.1)
    np.testing.assert_allclose(x, y, atol=1e-10)
    np.testing.assert_allclose(x, z, atol=1e-8)


def test_newton_failure_carries_residual():
    class Blowup:
        is_affine = False

        def __call__(self, u, t):
            return u**4

        def jacobian(self, u, t):
            return np.diag(4 * u**3)

    with pytest.raises(NewtonError) as err:
        irk.step(None, Blowup(), np.array([50.0]), 0.0, 0.5, control=irk.NewtonControl(max_iters=5))
    assert err.value.residual > 0


def test_stability_matrix():
    m, lo = irk.stability_matrix(irk.gauss_tableau(2))
    assert np.max(np.abs(m)) < 1e-14
    np.testing.assert_array_equal(m, m.T)
    m1, _ = irk.stability_matrix(irk.gauss_tableau(1))
    assert abs(m1[0, 0]) < 1e-15
    bad = irk.IRKTableau(np.array([[0.0]]), np.array([1.0]), np.array([0.0]))
    assert irk.stability_matrix(bad)[1] < 0


def test_dt_bound():
    t = irk.gauss_tableau(2)
    cab = math.sqrt(np.sum(t.a**2))
    assert irk.dt_bound(1.0, 2.0, 3.0, t) == pytest.approx(1 / (4 * math.sqrt(2) * 3 * 5 * cab))
    assert irk.dt_bound(1.0, 2.0, 0.0, t) == math.inf
    ratio = irk.dt_bound(1.0, 1e-3, 2e3, t) / irk.dt_bound(1.0, 1e-3, 1e3, t)
    assert ratio == pytest.approx(0.25, rel=1e-3)


def test_determinism():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((10, 10))
    a = a @ a.T
    u = rng.standard_normal(10)
    x = irk.step(a, Cubic(), u, 0.0, 0.1)
    y = irk.step(a, Cubic(), u, 0.0, 0.1)
    assert x.tobytes() == y.tobytes()


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.0, 50.0), dt=st.floats(0.01, 1.0))
def test_linear_contraction(lam, dt):
    # Gauss methods are A-stable: |R(z)| <= 1 on the negative axis
    u = irk.step(lam * np.eye(1), None, np.array([1.0]), 0.0, dt)
    assert abs(u[0]) <= 1 + 1e-12
