import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import chebyshev, hermite_e

from hcsolve import basis
from hcsolve.basis import BasisParams, Family
from hcsolve.exceptions import CapabilityError, DomainError


def jac(alpha=-0.5, r=1, beta=1.0, x0=0.0, alpha2=None):
    return BasisParams(Family.MAPPED_JACOBI, alpha, alpha if alpha2 is None else alpha2, r, beta, x0)


def herm(beta=1.0, x0=0.0):
    return BasisParams(Family.HERMITE, 0.0, 0.0, 0, beta, x0)


def test_jacobi_poly_trivial():
    assert basis.jacobi_poly(0, 0.3, -0.2, 0.7) == 1.0
    assert basis.jacobi_poly(1, 0, 0, 0.5) == pytest.approx(0.5)


def test_jacobi_poly_chebyshev_proportionality():
    # P_3^{(-1/2,-1/2)} = (6!/(2^6 (3!)^2)) T_3
    const = math.factorial(6) / (2**6 * math.factorial(3) ** 2)
    t3 = chebyshev.chebval(0.3, [0, 0, 0, 1])
    assert basis.jacobi_poly(3, -0.5, -0.5, 0.3) == pytest.approx(const * t3, rel=1e-14)
    assert t3 == pytest.approx(math.cos(3 * math.acos(0.3)))


def test_jacobi_poly_explicit_degree_two():
    # P_2^{(a,b)} from the explicit sum formula
    a, b, x = 0.7, -0.3, -0.4
    n = 2
    val = 0.0
    for s in range(n + 1):
        c1 = math.gamma(n + a + 1) / (math.gamma(s + 1) * math.gamma(n + a - s + 1))
        c2 = math.gamma(n + b + 1) / (math.gamma(n - s + 1) * math.gamma(b + s + 1))
        val += c1 * c2 * ((x - 1) / 2) ** (n - s) * ((x + 1) / 2) ** s
    assert basis.jacobi_poly(2, a, b, x) == pytest.approx(val, rel=1e-13)


def test_norm_gamma():
    assert basis.norm_gamma(0, 0, 0) == pytest.approx(2.0)
    assert basis.norm_gamma(0, -0.5, -0.5) == pytest.approx(math.pi)
    assert basis.norm_gamma(2, 0, 0) == pytest.approx(0.4)
    # Chebyshev: γ_n = c_n^2 π/2 for n ≥ 1
    c5 = math.factorial(10) / (2**10 * math.factorial(5) ** 2)
    assert basis.norm_gamma(5, -0.5, -0.5) == pytest.approx(c5**2 * math.pi / 2, rel=1e-13)


def test_maps():
    assert basis.map_forward(0.7, 1, 0.0) == 0.0
    assert basis.map_forward(1.0, 0, 1.0) == pytest.approx(math.tanh(1.0))
    for r in (0, 1):
        for y in (-3.0, 0.7, 10.0):
            xi = basis.map_forward(0.8, r, y)
            # tanh saturates: y = 10 is recovered only to ~eps / (1 - ξ)
            assert basis.map_inverse(0.8, r, xi) == pytest.approx(y, rel=1e-9)
    with pytest.raises(DomainError):
        basis.map_inverse(1.0, 0, 1.0)
    with pytest.raises(DomainError):
        basis.map_jacobian(1.0, 1, -1.5)


@given(st.sampled_from([0, 1]), st.floats(0.3, 3.0), st.floats(-5, 5))
def test_map_jacobian_matches_finite_difference(r, beta, t):
    # |βy| <= 5 keeps 1 - ξ² well above rounding level
    y = t / beta
    h = 1e-6
    fd = (basis.map_forward(beta, r, y + h) - basis.map_forward(beta, r, y - h)) / (2 * h)
    xi = basis.map_forward(beta, r, y)
    assert basis.map_jacobian(beta, r, xi) == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_basis_eval_values():
    assert basis.basis_eval(0, jac(beta=1.0), 0.0) == pytest.approx(1 / math.sqrt(math.pi))
    assert basis.basis_eval(0, jac(beta=2.5, x0=1.3), 1.3) == pytest.approx(math.sqrt(2.5 / math.pi))
    assert basis.basis_eval(0, herm(), 0.0) == pytest.approx(math.pi**-0.25)


def test_hermite_matches_probabilists_polynomials():
    x = np.linspace(-3, 3, 7)
    n = 6
    he = hermite_e.hermeval(x * math.sqrt(2), [0] * n + [1])
    ref = he * np.exp(-x**2 / 2) / math.sqrt(math.sqrt(math.pi) * math.factorial(n))
    got = basis.eval_table(herm(), n, x)[n]
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-14)


ALL_PARAMS = [
    jac(a, r, b)
    for a in (-0.5, 0.0)
    for r in (0, 1)
    for b in (0.4, 1.0, 2.5)
] + [herm(b) for b in (0.4, 1.05, 2.5)]


@pytest.mark.parametrize("params", ALL_PARAMS, ids=str)
def test_orthonormality_q64(params):
    rule = basis.quad_rule(64, params)
    tab = basis.eval_table(params, 30, rule.nodes)
    gram = (tab * rule.weights) @ tab.T
    assert np.max(np.abs(gram - np.eye(31))) < 1e-10


def test_quadrature_properties():
    p = jac(beta=0.6, x0=0.0)
    rule = basis.quad_rule(9, p)
    np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=0)
    assert np.all(np.diff(rule.nodes) > 0) and np.all(rule.weights > 0)
    assert np.sum(rule.weights * basis.eval_table(p, 0, rule.nodes)[0] ** 2) == pytest.approx(1.0)
    one = basis.quad_rule(1, jac(alpha=0.0, x0=2.0))
    assert one.nodes[0] == pytest.approx(2.0)
    with pytest.raises(CapabilityError):
        basis.quad_rule(501, p)


def test_shifted_rule_integrates_advection_exactly():
    # ∫ J_m J_n' dx has weight exponent α + r/2; the shifted rule is exact
    p = jac(alpha=-0.5, r=1, beta=0.9)
    ref = basis.quad_rule(400, p)
    rule = basis.quad_rule(40, p, shift=0.5)
    def advection(rule_):
        v = basis.eval_table(p, 20, rule_.nodes)
        d = basis.deriv_table(p, 20, rule_.nodes)
        return (v * rule_.weights) @ d.T
    exact_small = advection(rule)
    assert np.max(np.abs(exact_small + exact_small.T)) < 1e-11
    assert np.max(np.abs(exact_small - advection(ref))) < 1e-5


@pytest.mark.parametrize("params", ALL_PARAMS + [jac(0.0, 0, 1.0, 0.8, alpha2=1.5)], ids=str)
def test_derivative_matches_finite_differences(params):
    rng = np.random.default_rng(3)
    x = params.x0 + rng.normal(scale=2.0 / params.beta, size=100)
    h = 1e-5
    d = basis.deriv_table(params, 12, x)
    fd = (basis.eval_table(params, 12, x + h) - basis.eval_table(params, 12, x - h)) / (2 * h)
    scale = np.max(np.abs(d), axis=1, keepdims=True)
    assert np.max(np.abs(d - fd) / scale) < 1e-6


def test_derivative_trivial_and_ladder():
    assert basis.basis_deriv(0, jac(alpha=0.0, r=0), 0.0) == pytest.approx(0.0, abs=1e-15)
    # ladder: ψ_1' = √(1/2) ψ_0 - ψ_2, and ψ_2(0) = -ψ_0(0)/√2
    psi0 = math.pi**-0.25
    assert basis.basis_deriv(1, herm(), 0.0) == pytest.approx(math.sqrt(0.5) * psi0 + psi0 / math.sqrt(2))


def test_inv_const():
    assert basis.inv_const(50, -0.5, -0.5, 1) == pytest.approx(5000.5)
    assert basis.inv_const(0, 0, 0, 0) == pytest.approx(2.0)
    # 2·1·2 + 2·(1 + 1/2)²
    assert basis.inv_const(1, 0, 0, 1) == pytest.approx(8.5)


def test_params_validation():
    with pytest.raises(ValueError):
        jac(alpha=-1.0)
    with pytest.raises(ValueError):
        jac(r=2)
    with pytest.raises(ValueError):
        jac(beta=0.0)


@settings(max_examples=20, deadline=None)
@given(
    st.sampled_from([-0.5, 0.0]),
    st.sampled_from([0, 1]),
    st.sampled_from([0.4, 1.0, 2.5]),
    st.integers(2, 30),
    st.integers(0, 10_000),
)
def test_inverse_inequalities_random_1d(alpha, r, beta, n, seed):
    params = jac(alpha, r, beta)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n + 1)
    rule = basis.quad_rule(2 * (n + 1), params)
    u = c @ basis.eval_table(params, n, rule.nodes)
    du = c @ basis.deriv_table(params, n, rule.nodes)
    norm_u = math.sqrt(np.sum(rule.weights * u**2))
    bound = basis.inv_const(n, alpha, alpha, r)
    assert math.sqrt(np.sum(rule.weights * du**2)) <= beta**1.5 * math.sqrt(bound) * norm_u
    assert math.sqrt(np.sum(rule.weights * (rule.nodes * du) ** 2)) <= beta**0.5 * math.sqrt(bound) * norm_u


def _worst_inverse_ratios(params, n):
    """Largest ‖∂U‖²/‖U‖² and ‖(x-x0)∂U‖²/‖U‖² over the span, on the 2(n+1) rule."""
    from scipy.linalg import eigh

    rule = basis.quad_rule(2 * (n + 1), params)
    t = basis.eval_table(params, n, rule.nodes)
    d = basis.deriv_table(params, n, rule.nodes)
    g = (t * rule.weights) @ t.T
    s = (d * rule.weights) @ d.T
    x = (d * rule.weights * (rule.nodes - params.x0) ** 2) @ d.T
    return eigh(s, g, eigvals_only=True)[-1], eigh(x, g, eigvals_only=True)[-1]


def test_inverse_inequality_scaling_in_beta():
    # U(x) = sqrt(β) V(βx): the derivative ratio scales like β², the weighted one not at all
    for alpha, r in ((-0.5, 0), (-0.5, 1), (0.0, 1)):
        s1, x1 = _worst_inverse_ratios(jac(alpha, r, 1.0), 12)
        for beta in (0.2, 0.3, 3.0):
            s, x = _worst_inverse_ratios(jac(alpha, r, beta, x0=0.7), 12)
            assert s == pytest.approx(beta**2 * s1, rel=1e-9)
            assert x == pytest.approx(x1, rel=1e-9)


def test_inverse_inequality_beta_corrected_bound():
    # ‖∂U‖ ≤ β N^{1/2} ‖U‖ and ‖(x-x0)∂U‖ ≤ N^{1/2} ‖U‖ hold for every β
    for alpha in (-0.5, 0.0, 0.5):
        for r in (0, 1):
            for n in (1, 2, 5, 10, 20, 30):
                s, x = _worst_inverse_ratios(jac(alpha, r, 1.0), n)
                K = basis.inv_const(n, alpha, alpha, r)
                assert s <= K and x <= K


def test_inverse_inequality_beta_cubed_form_fails_for_small_beta():
    # the β^{3/2} form of the derivative bound is violated by the r = 0 basis at β = 0.3
    p = jac(-0.5, 0, 0.3)
    s, _ = _worst_inverse_ratios(p, 1)
    assert s / (0.3**3 * basis.inv_const(1, -0.5, -0.5, 0)) == pytest.approx(1.146, abs=1e-3)
