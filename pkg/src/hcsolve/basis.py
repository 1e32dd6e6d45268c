"""One-dimensional orthonormal bases on the real line.

Two families are provided:

* mapped Jacobi functions ``J_n(x) = γ_n^{-1/2} P_n^{(α1,α2)}(ξ) sqrt(w(ξ) h'(ξ))``
  with ``ξ = h(x - x0)`` and ``h`` the logarithmic (``r = 0``) or algebraic
  (``r = 1``) map onto ``(-1, 1)``;
* Hermite functions ``sqrt(β) ψ_n(β (x - x0))``.

Both are orthonormal in L²(ℝ). Most routines work on whole tables, one row per
degree, since that is how the transforms consume them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.special import roots_hermite, roots_jacobi

from .exceptions import CapabilityError, DomainError

__all__ = [
    "Family",
    "BasisParams",
    "QuadratureRule",
    "jacobi_poly",
    "norm_gamma",
    "map_forward",
    "map_inverse",
    "map_jacobian",
    "eval_table",
    "deriv_table",
    "basis_eval",
    "basis_deriv",
    "quad_rule",
    "inv_const",
    "MAX_RULE_SIZE",
]

MAX_RULE_SIZE = 500


class Family(str, Enum):
    MAPPED_JACOBI = "jacobi"
    HERMITE = "hermite"


@dataclass(frozen=True)
class BasisParams:
    """Basis description for one dimension.

    ``alpha1``, ``alpha2`` and ``r`` are ignored by the Hermite family.
    """

    family: Family = Family.MAPPED_JACOBI
    alpha1: float = -0.5
    alpha2: float = -0.5
    r: int = 1
    beta: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.alpha1 > -1 and self.alpha2 > -1):
            raise ValueError(f"Jacobi exponents must exceed -1, got {self.alpha1}, {self.alpha2}")
        if self.r not in (0, 1):
            raise ValueError(f"mapping order r must be 0 or 1, got {self.r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"scaling factor must be positive, got {self.beta}")
        if not math.isfinite(self.x0):
            raise ValueError("displacement must be finite")

    @property
    def symmetric(self) -> bool:
        return self.family is Family.HERMITE or self.alpha1 == self.alpha2

    def with_(self, **changes) -> "BasisParams":
        return replace(self, **changes)

    def __str__(self):
        if self.family is Family.HERMITE:
            return f"hermite(beta={self.beta:g}, x0={self.x0:g})"
        return (
            f"jacobi(a=({self.alpha1:g},{self.alpha2:g}), r={self.r}, "
            f"beta={self.beta:g}, x0={self.x0:g})"
        )


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss rule mapped to the physical line; weights absorb the mapping."""

    nodes: np.ndarray
    weights: np.ndarray
    params: BasisParams
    shift: float = 0.0

    @property
    def size(self) -> int:
        return self.nodes.size


def jacobi_poly(n, alpha1, alpha2, xi):
    """Jacobi polynomial ``P_n^{(α1,α2)}(ξ)`` by the three-term recurrence."""
    return _jacobi_table(int(n), alpha1, alpha2, np.asarray(xi, dtype=float))[int(n)][()]


def _jacobi_table(n_max, a, b, xi):
    xi = np.asarray(xi)
    out = np.empty((n_max + 1,) + xi.shape, dtype=xi.dtype if np.iscomplexobj(xi) else float)
    out[0] = 1.0
    if n_max == 0:
        return out
    out[1] = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * xi
    for n in range(1, n_max):
        k = 2.0 * n + a + b
        c1 = 2.0 * (n + 1) * (n + a + b + 1) * k
        c2 = (k + 1) * (a * a - b * b)
        c3 = k * (k + 1) * (k + 2)
        c4 = 2.0 * (n + a) * (n + b) * (k + 2)
        out[n + 1] = ((c2 + c3 * xi) * out[n] - c4 * out[n - 1]) / c1
    return out


def _log_norm_gamma(n, a, b):
    if n == 0:
        return (a + b + 1) * math.log(2.0) + math.lgamma(a + 1) + math.lgamma(b + 1) - math.lgamma(a + b + 2)
    return (
        (a + b + 1) * math.log(2.0)
        + math.lgamma(n + a + 1)
        + math.lgamma(n + b + 1)
        - math.log(2 * n + a + b + 1)
        - math.lgamma(n + a + b + 1)
        - math.lgamma(n + 1)
    )


def norm_gamma(n, alpha1, alpha2):
    """Squared weighted L² norm of ``P_n^{(α1,α2)}`` on ``[-1, 1]``."""
    return math.exp(_log_norm_gamma(int(n), alpha1, alpha2))


def map_forward(beta, r, y):
    """``ξ = h(y)``: ``tanh(βy)`` for ``r = 0``, ``βy/√(1+β²y²)`` for ``r = 1``."""
    t = beta * np.asarray(y, dtype=float)
    if r == 0:
        return np.tanh(t)[()]
    return (t / np.sqrt(1.0 + t * t))[()]


def _check_open_interval(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi) >= 1.0):
        raise DomainError("reference variable must satisfy |ξ| < 1")
    return xi


def map_inverse(beta, r, xi):
    """Inverse of :func:`map_forward`."""
    xi = _check_open_interval(xi)
    if r == 0:
        return (np.arctanh(xi) / beta)[()]
    return (xi / (beta * np.sqrt((1.0 - xi) * (1.0 + xi))))[()]


def map_jacobian(beta, r, xi):
    """``dξ/dx = β(1-ξ²)^{1+r/2}``."""
    xi = _check_open_interval(xi)
    return (beta * ((1.0 - xi) * (1.0 + xi)) ** (1.0 + 0.5 * r))[()]


def _one_minus_plus(beta, r, y):
    """Return ``ξ, 1-ξ, 1+ξ`` computed without cancellation."""
    t = beta * y
    if r == 0:
        xi = np.tanh(t)
        om = 2.0 / (1.0 + np.exp(np.clip(2.0 * t, -700, 700)))
        op = 2.0 / (1.0 + np.exp(np.clip(-2.0 * t, -700, 700)))
        return xi, om, op
    s = np.sqrt(1.0 + t * t)
    xi = t / s
    at = np.abs(t)
    small = 1.0 / (s * (s + at))
    om = np.where(t > 0, small, 1.0 - xi)
    op = np.where(t < 0, small, 1.0 + xi)
    return xi, om, op


def _hermite_tables(n_max, t):
    psi = np.empty((n_max + 2,) + t.shape)
    psi[0] = math.pi**-0.25 * np.exp(-0.5 * t * t)
    psi[1] = math.sqrt(2.0) * t * psi[0]
    for n in range(1, n_max + 1):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * t * psi[n] - math.sqrt(n / (n + 1.0)) * psi[n - 1]
    return psi


def eval_table(params: BasisParams, n_max: int, x) -> np.ndarray:
    """Values ``J_n(x_k)`` for ``n = 0..n_max``, shape ``(n_max+1, len(x))``."""
    x = np.asarray(x, dtype=float)
    y = x - params.x0
    if params.family is Family.HERMITE:
        return math.sqrt(params.beta) * _hermite_tables(n_max, params.beta * y)[: n_max + 1]
    a, b, r = params.alpha1, params.alpha2, params.r
    xi, om, op = _one_minus_plus(params.beta, r, y)
    e1 = 0.5 * (a + 1.0 + 0.5 * r)
    e2 = 0.5 * (b + 1.0 + 0.5 * r)
    mu = math.sqrt(params.beta) * om**e1 * op**e2
    p = _jacobi_table(n_max, a, b, xi)
    scale = np.exp([-0.5 * _log_norm_gamma(n, a, b) for n in range(n_max + 1)])
    return p * (scale.reshape((-1,) + (1,) * x.ndim) * mu)


def deriv_table(params: BasisParams, n_max: int, x) -> np.ndarray:
    """Derivatives ``J_n'(x_k)``, same layout as :func:`eval_table`."""
    x = np.asarray(x, dtype=float)
    y = x - params.x0
    if params.family is Family.HERMITE:
        psi = _hermite_tables(n_max, params.beta * y)
        out = np.empty((n_max + 1,) + x.shape)
        for n in range(n_max + 1):
            out[n] = -math.sqrt((n + 1) / 2.0) * psi[n + 1]
            if n > 0:
                out[n] += math.sqrt(n / 2.0) * psi[n - 1]
        return params.beta**1.5 * out
    a, b, r = params.alpha1, params.alpha2, params.r
    xi, om, op = _one_minus_plus(params.beta, r, y)
    e1 = 0.5 * (a + 1.0 + 0.5 * r)
    e2 = 0.5 * (b + 1.0 + 0.5 * r)
    g = 1.0 + 0.5 * r
    p = _jacobi_table(n_max, a, b, xi)
    dp = np.zeros_like(p)
    if n_max > 0:
        q = _jacobi_table(n_max - 1, a + 1.0, b + 1.0, xi)
        for n in range(1, n_max + 1):
            dp[n] = 0.5 * (n + a + b + 1.0) * q[n - 1]
    # d/dx [P μ] = h' (P' μ + P μ'), exponents combined so none is negative
    w_dp = om ** (e1 + g) * op ** (e2 + g)
    w_p = -e1 * om ** (e1 + g - 1.0) * op ** (e2 + g) + e2 * om ** (e1 + g) * op ** (e2 + g - 1.0)
    scale = np.exp([-0.5 * _log_norm_gamma(n, a, b) for n in range(n_max + 1)])
    scale = scale.reshape((-1,) + (1,) * x.ndim)
    return params.beta**1.5 * scale * (dp * w_dp + p * w_p)


def basis_eval(n: int, params: BasisParams, x):
    """Single basis function ``J_n(x)``."""
    return eval_table(params, int(n), np.asarray(x, dtype=float))[int(n)][()]


def basis_deriv(n: int, params: BasisParams, x):
    """Single derivative ``J_n'(x)``."""
    return deriv_table(params, int(n), np.asarray(x, dtype=float))[int(n)][()]


def _symmetrize(v, odd=True):
    return 0.5 * (v - v[::-1]) if odd else 0.5 * (v + v[::-1])


def quad_rule(Q: int, params: BasisParams, shift: float = 0.0) -> QuadratureRule:
    """Gauss rule with ``Q`` nodes in the physical variable.

    ``Σ_k w_k J_m(x_k) J_n(x_k) = δ_mn`` holds exactly for ``m + n <= 2Q - 1``.
    For the mapped family, ``shift`` raises both Jacobi exponents of the
    underlying Gauss rule, so that integrands carrying an extra factor
    ``(1-ξ²)^shift`` (such as ``J_m J_n'`` when ``r = 1``) are integrated
    exactly as well.
    """
    Q = int(Q)
    if Q < 1:
        raise ValueError("rule size must be positive")
    if Q > MAX_RULE_SIZE:
        raise CapabilityError(f"quadrature size {Q} exceeds {MAX_RULE_SIZE}")
    if params.family is Family.HERMITE:
        t, _ = roots_hermite(Q)
        t = _symmetrize(t)
        x = params.x0 + t / params.beta
        psi = _hermite_tables(Q - 1, t)[:Q]
        w = 1.0 / (params.beta * np.sum(psi * psi, axis=0))
        w = _symmetrize(w, odd=False)
        return QuadratureRule(x, w, params, 0.0)
    a, b, r = params.alpha1 + shift, params.alpha2 + shift, params.r
    xi, omega = roots_jacobi(Q, a, b)
    if params.alpha1 == params.alpha2:
        xi = _symmetrize(xi)
        omega = _symmetrize(omega, odd=False)
    om, op = 1.0 - xi, 1.0 + xi
    if r == 0:
        y = np.arctanh(xi) / params.beta
    else:
        y = xi / (params.beta * np.sqrt(om * op))
    # weight of the Gauss rule divided by w·h' of the basis
    e1 = params.alpha1 + 1.0 + 0.5 * r
    e2 = params.alpha2 + 1.0 + 0.5 * r
    w = omega / (params.beta * om ** (e1 + shift) * op ** (e2 + shift))
    return QuadratureRule(params.x0 + y, w, params, shift)


def inv_const(N, alpha1, alpha2, r) -> float:
    """``N_{α,r} = 2N(N+α1+α2+1) + 2(1+α1+α2+r/2)²``."""
    return 2.0 * N * (N + alpha1 + alpha2 + 1.0) + 2.0 * (1.0 + alpha1 + alpha2 + 0.5 * r) ** 2
