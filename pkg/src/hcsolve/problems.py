"""Benchmark problems with manufactured solutions.

Each problem is written as ``u_t = -L u + f(u) + g`` where ``L`` collects
the linear terms (``terms``), ``f`` is the pointwise reaction returned by
:meth:`ProblemSpec.reaction` together with ``∂f/∂u``, and ``g`` the source.
Keller-Segel type problems add the flux ``κ ∂_x(u ∂_x(|x| * u))``.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from . import field, operators as ops, sparse_index as si, specfun
from .basis import BasisParams, Family
from .exceptions import ConfigError, DataError

__all__ = [
    "ProblemSpec",
    "LinearPart",
    "builtin",
    "list_problems",
    "assemble_operator",
    "power_fractional",
    "gaussian_wave_fractional",
    "residual_check",
    "relative_error",
]

SQ3 = math.sqrt(3.0)
V3 = (0.5, SQ3 / 2)

# dense fractional matrices are assembled up to this many basis functions;
# larger sets use the matrix-free subordinated operator
DENSE_FRACTIONAL = 3000

# tuned adaptivity settings per problem (keys of the [adaptive] config section)
_ADAPT_1 = dict(delta=0.01, q=0.99, nu=1.01, n_max=3, eta0=1.2, sigma=1.2,
                enable_move=False, enable_scale=True, enable_order=True)
_ADAPT_2 = dict(delta=0.01, d_max=0.2, mu=1.0005, q=0.99, nu=1.01,
                enable_move=True, enable_scale=True, enable_order=False)
_ADAPT_3 = dict(delta=0.01, d_max=(0.06, 0.09), mu=1.0005, q=0.99, nu=1.01,
                enable_move=True, enable_scale=True, enable_order=False)
_ADAPT_4 = dict(delta=0.01, q=0.99, nu=1.01, n_max=5, eta0=1.2, sigma=1.1,
                enable_move=False, enable_scale=True, enable_order=True)
_ADAPT_5 = dict(delta=0.01, q=0.99, nu=1.01, n_max=5, eta0=1.2, sigma=1.2,
                enable_move=False, enable_scale=True, enable_order=True)


class ProblemSpec:
    """A PDE ``u_t + L u = f(u) + g`` on ``ℝ^d`` with optional exact solution.

    Parameters
    ----------
    terms : tuple of (kind, options)
        Linear terms: ``("fractional", {"s": s})``, ``("advection", {"v": v})``,
        ``("diffusion", {"coeff": c})``, ``("potential", {"coeff": c})``.
    params : tuple of BasisParams
        Recommended initial basis per dimension.
    """

    has_reaction = False
    has_flux = False
    flux_coeff = 0.0
    has_exact = True

    def __init__(self, name, d, params, N, gamma, terms, T=1.0, dt=0.1, adaptive=None, description=""):
        self.name = name
        self.d = int(d)
        self.params = tuple(params)
        if len(self.params) != self.d:
            raise ValueError("one BasisParams per dimension is required")
        self.N = int(N)
        self.gamma = gamma
        self.terms = tuple((k, dict(o)) for k, o in terms)
        self.T = float(T)
        self.dt = float(dt)
        self.adaptive = dict(adaptive or {})
        self.description = description

    def __repr__(self):
        return f"ProblemSpec({self.name!r}, d={self.d}, N={self.N}, gamma={self.gamma})"

    @property
    def family(self):
        return self.params[0].family

    def initial(self, x):
        return self.exact(x, 0.0)

    def exact(self, x, t):
        raise NotImplementedError

    def reaction(self, u, x, t):
        """``(f(u, x, t), ∂f/∂u)`` on sample points."""
        return np.zeros_like(u), np.zeros_like(u)

    def source(self, x, t):
        return None

    def with_params(self, params):
        """Copy of the problem with another initial basis."""
        out = object.__new__(type(self))
        out.__dict__.update(self.__dict__)
        out.params = tuple(params)
        return out


# ---------------------------------------------------------------------------
# closed forms

def power_fractional(z2, g, s, d):
    """``(-Δ)^{s/2} (1+|x|²)^{-g}`` in ``d`` dimensions at ``|x|² = z2``.

    ``2^s Γ(g+s/2)Γ(d/2+s/2) / (Γ(g)Γ(d/2)) (1+z2)^{-g-s/2}
    ₂F₁(g+s/2, -s/2; d/2; z2/(1+z2))``, the Pfaff form of the radial formula.
    """
    sig = 0.5 * s
    const = 2.0 ** s * specfun.gamma_fn(g + sig) * specfun.gamma_fn(0.5 * d + sig)
    const /= specfun.gamma_fn(g) * specfun.gamma_fn(0.5 * d)
    z2 = np.asarray(z2, dtype=float)
    y = z2 / (1.0 + z2)
    hyp = np.vectorize(lambda v: specfun.hyp2f1(g + sig, -sig, 0.5 * d, float(v)), otypes=[float])(y)
    return const * (1.0 + z2) ** (-g - sig) * hyp


def gaussian_wave_fractional(x, k, a, s, h=0.125, u_range=(-36.0, 44.0), chunk=2048):
    """``(-Δ)^{s/2} exp(i k·x - a|x|²)`` at points ``x`` (complex result).

    Uses the heat-semigroup form of the fractional Laplacian; the heat flow of
    a complex Gaussian is explicit, leaving one integral over ``log τ``:

        c ∫ τ^{-1-s/2} (φ - e^{τΔ}φ) dτ,   c = (s/2)/Γ(1-s/2).

    The first-order part ``-τΔφ`` is damped by ``e^{-τ}`` and integrated
    exactly, so the trapezoid sees an ``O(τ²)`` integrand near ``τ = 0``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = np.asarray(k, dtype=float)
    sig = 0.5 * s
    const = sig / math.gamma(1.0 - sig)
    us = np.arange(u_range[0], u_range[1] + 0.5 * h, h)
    tau = np.exp(us)
    w = h * tau ** (-sig)
    w[0] *= 0.5
    w[-1] *= 0.5
    out = np.empty(x.shape[0], dtype=complex)
    for start in range(0, x.shape[0], chunk):
        p = x[start : start + chunk]
        lin = a * p**2 - 1j * k * p
        phi = np.exp(-np.sum(lin, axis=1))
        lap = np.sum((1j * k - 2 * a * p) ** 2 - 2 * a, axis=1) * phi
        T = tau[:, None]
        ell = -0.5 * p.shape[1] * np.log1p(4 * a * T) + (
            (np.sum(lin, axis=1)[None, :] * 4 * a - np.sum(k**2)) * T
        ) / (1 + 4 * a * T)
        body = -phi[None, :] * np.expm1(ell) + T * np.exp(-T) * lap[None, :]
        acc = w @ body
        tail = phi * (1.0 / sig) * tau[-1] ** (-sig)
        out[start : start + chunk] = const * (acc + tail - lap * math.gamma(1.0 - sig))
    return out


# ---------------------------------------------------------------------------
# the five examples

def _jac(alpha, r, beta, d=1):
    b = beta if isinstance(beta, tuple) else (beta,) * d
    return tuple(BasisParams(Family.MAPPED_JACOBI, alpha, alpha, r, bi, 0.0) for bi in b)


def _her(beta, d=1):
    b = beta if isinstance(beta, tuple) else (beta,) * d
    return tuple(BasisParams(Family.HERMITE, beta=bi) for bi in b)


class FractionalReaction1D(ProblemSpec):
    """``u_t + (-Δ)^{1/2} u + u(1-u²) = g``, ``u = (1+t)^{12}/((1+t)²+x²)^6``."""

    has_reaction = True

    def __init__(self, name="ex1", params=None):
        super().__init__(
            name, 1, params or _jac(-0.5, 1, 0.6), 50, 0,
            (("fractional", {"s": 1.0}),), adaptive=_ADAPT_1,
            description="1D fractional reaction-diffusion, algebraic decay",
        )

    def exact(self, x, t):
        z2 = (x[:, 0] / (1.0 + t)) ** 2
        return (1.0 + z2) ** -6

    def reaction(self, u, x, t):
        return -u * (1.0 - u * u), -1.0 + 3.0 * u * u

    def source(self, x, t):
        z2 = (x[:, 0] / (1.0 + t)) ** 2
        q = 1.0 + z2
        ut = 12.0 * z2 / ((1.0 + t) * q**7)
        react = (q**12 - 1.0) / q**18
        frac = power_fractional(z2, 6, 1.0, 1) / (1.0 + t)
        return ut + react + frac


class KellerSegel1D(ProblemSpec):
    """``u_t + 2u_x - u_xx/2 - ∂_x(u ∂_x(|x|*u))/4 = 0``, a travelling pulse.

    The pulse ``sech²((x-2t)/4)/8`` balances diffusion against aggregation
    only with the flux coefficient ``-1/4``.
    """

    has_flux = True
    flux_coeff = 0.25

    def __init__(self, name="ex2", params=None):
        super().__init__(
            name, 1, params or _jac(0.0, 1, 0.4), 50, 0,
            (("advection", {"v": (2.0,)}), ("diffusion", {"coeff": 0.5})),
            T=2.0, adaptive=_ADAPT_2,
            description="1D Keller-Segel aggregation with a moving pulse",
        )

    def exact(self, x, t):
        return 0.125 / np.cosh((x[:, 0] - 2.0 * t) / 4.0) ** 2


class FractionalAdvection2D(ProblemSpec):
    """``u_t + v·∇u + (-Δ)^{1/2}u + u(1-u) = g`` with a drifting algebraic bump."""

    has_reaction = True

    def __init__(self, name="ex3", params=None):
        super().__init__(
            name, 2, params or _jac(-0.5, 1, 0.9, 2), 30, -5,
            (("advection", {"v": V3}), ("fractional", {"s": 1.0})),
            adaptive=_ADAPT_3,
            description="2D fractional advection-diffusion-reaction",
        )

    def _z2(self, x, t):
        return ((x[:, 0] - V3[0] * t) ** 2 + (x[:, 1] - V3[1] * t) ** 2) / (1.0 + t) ** 2

    def exact(self, x, t):
        return (1.0 + self._z2(x, t)) ** -7 / (1.0 + t)

    def reaction(self, u, x, t):
        return -u * (1.0 - u), -1.0 + 2.0 * u

    def source(self, x, t):
        z2 = self._z2(x, t)
        q = 1.0 + z2
        s = 1.0 + t
        transport = (14.0 * z2 / q**8 - 1.0 / q**7) / s**2
        react = (1.0 / (s * q**7)) * (1.0 - 1.0 / (s * q**7))
        frac = power_fractional(z2, 7, 1.0, 2) / s**2
        return transport + react + frac


class FractionalDiffusion3D(ProblemSpec):
    """``u_t + (-Δ)^{3/4}u = g`` with a spreading modulated Gaussian."""

    K = np.array([1.0, 1.2, 0.5])

    def __init__(self, name="ex4", params=None):
        super().__init__(
            name, 3, params or _jac(-0.5, 0, (0.4, 0.37, 0.3)), 25, -10,
            (("fractional", {"s": 1.5}),), adaptive=_ADAPT_4,
            description="3D fractional diffusion, exponential decay",
        )

    def exact(self, x, t):
        r2 = np.sum(x**2, axis=1)
        return np.sin(x @ self.K) * (3 * t + 1) ** -1.5 * np.exp(-r2 / (6 * t + 2))

    def fractional_part(self, x, t):
        """``(-Δ)^{3/4} u(·, t)``, exact up to quadrature in log τ."""
        a = 1.0 / (6 * t + 2)
        return (3 * t + 1) ** -1.5 * gaussian_wave_fractional(x, self.K, a, 1.5).imag

    def source(self, x, t):
        r2 = np.sum(x**2, axis=1)
        m = 6 * t + 2
        ut = self.exact(x, t) * (6 * r2 / m**2 - 9 / m)
        return ut + self.fractional_part(x, t)


class HarmonicOscillator4D(ProblemSpec):
    """``u_t - Δu + |x|²u = g`` with a spreading modulated Gaussian."""

    def __init__(self, name="ex5", params=None):
        super().__init__(
            name, 4, params or _her(1.05, 4), 11, -3,
            (("diffusion", {"coeff": 1.0}), ("potential", {"coeff": 1.0})),
            adaptive=_ADAPT_5,
            description="4D diffusion with harmonic potential",
        )

    def exact(self, x, t):
        s = 1.0 + t
        return np.cos(np.sum(x, axis=1)) * np.exp(-np.sum(x**2, axis=1) / s) / s**2

    def source(self, x, t):
        s = 1.0 + t
        p = np.sum(x, axis=1)
        r2 = np.sum(x**2, axis=1)
        body = ((s * s - 3.0) / s * r2 + 2.0 * (2.0 * t + 5.0)) * np.cos(p) - 4.0 * p * np.sin(p)
        return body * np.exp(-r2 / s) / s**3


_REGISTRY = {
    "ex1": lambda: FractionalReaction1D(),
    "ex1-hermite": lambda: FractionalReaction1D("ex1-hermite", _her(2.5)),
    "ex2": lambda: KellerSegel1D(),
    "ex2-hermite": lambda: KellerSegel1D("ex2-hermite", _her(1.2)),
    "ex3": lambda: FractionalAdvection2D(),
    "ex4": lambda: FractionalDiffusion3D(),
    "ex5": lambda: HarmonicOscillator4D(),
    "ex5-hermite": lambda: HarmonicOscillator4D("ex5-hermite"),
}


def list_problems():
    return sorted(_REGISTRY)


def builtin(name: str) -> ProblemSpec:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ConfigError(f"unknown problem {name!r}; choose from {', '.join(list_problems())}") from None


# ---------------------------------------------------------------------------
# discretisation

class LinearPart:
    """Sum of the linear Galerkin operators of a problem.

    ``matrix`` is a sparse or dense matrix, or ``None`` when a large
    fractional term is only available matrix-free.
    """

    def __init__(self, local, fractional, n):
        self.local = local
        self.fractional = fractional
        self.n = n
        if fractional is None:
            self.matrix = local
        elif isinstance(fractional, np.ndarray):
            self.matrix = fractional + local.toarray()
        else:
            self.matrix = None

    @property
    def shape(self):
        return (self.n, self.n)

    def matvec(self, v):
        out = self.local @ v
        if self.fractional is not None:
            if isinstance(self.fractional, np.ndarray):
                out = out + self.fractional @ v
            else:
                out = out + self.fractional.matvec(v)
        return out

    def __matmul__(self, v):
        return self.matvec(v)

    def dense(self):
        if self.matrix is None:
            return np.column_stack([self.matvec(e) for e in np.eye(self.n)])
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)


def assemble_operator(problem: ProblemSpec, index_set, params, use_cache=False, dense_limit=DENSE_FRACTIONAL):
    """The operator ``L`` of ``u_t = -L u + F(u)`` on ``index_set``."""
    params = tuple(params)
    n = len(index_set)
    local = sp.csr_matrix((n, n))
    frac = None
    for kind, opts in problem.terms:
        if kind == "fractional":
            s = opts["s"]
            if n <= dense_limit:
                frac = ops.assemble_fractional(index_set, params, s, use_cache=use_cache).dense()
            else:
                frac = ops.fractional_subordination(index_set, params, s)
        elif kind == "advection":
            local = local + ops.assemble_advection(index_set, params, opts["v"]).matrix
        elif kind == "diffusion":
            local = local + ops.assemble_diffusion(index_set, params, opts.get("coeff", 1.0)).matrix
        elif kind == "potential":
            local = local + ops.assemble_potential(index_set, params, opts.get("coeff", 1.0)).matrix
        else:
            raise ConfigError(f"unknown operator term {kind!r}")
    return LinearPart(local.tocsr(), frac, n)


def _sample_points(problem, grid, box=2.0):
    if grid is None:
        grid = 5 if problem.d >= 3 else 41
    if isinstance(grid, (int, np.integer)):
        axis = np.linspace(-box, box, int(grid))
        mesh = np.meshgrid(*([axis] * problem.d), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)
    return np.atleast_2d(np.asarray(grid, dtype=float))


def residual_check(problem: ProblemSpec, t, grid=None, N=None, gamma=None, params=None, h=1e-6):
    """Max residual of the manufactured solution in the Galerkin discretisation.

    ``u*`` and ``∂_t u*`` (central differences) are projected on the set; the
    residual coefficients ``P ∂_t u* + L u* - F(u*)`` are evaluated at the
    sample points ``grid`` (an ``m^d`` uniform grid on ``[-2, 2]^d`` when an
    integer).
    """
    N = problem.N if N is None else N
    gamma = problem.gamma if gamma is None else gamma
    params = problem.params if params is None else tuple(params)
    s = si.build(problem.d, N, gamma)
    u = field.analyze(lambda x: problem.exact(x, t), s, params)
    ut = field.analyze(lambda x: (problem.exact(x, t + h) - problem.exact(x, t - h)) / (2 * h), s, params)
    A = assemble_operator(problem, s, params)
    F = ops.make_nonlinear_rhs(problem, s, params)
    r = ut.coeffs + A.matvec(u.coeffs) - F(u.coeffs, t)
    vals = field.synthesize(u.with_coeffs(r), _sample_points(problem, grid))
    return float(np.max(np.abs(vals)))


def relative_error(f: field.SpectralField, problem: ProblemSpec, t) -> float:
    """``‖u* - U‖ / ‖u*‖`` by Gauss quadrature of twice the field's order."""
    grid = field.TensorGrid(f.index_set.max_degree, f.params, oversample=2.0)
    exact = problem.exact(grid.points(), t).reshape(grid.shape)
    num = grid.integrate((exact - field.grid_values(f, grid)) ** 2)
    den = grid.integrate(exact**2)
    if den <= 0.0:
        raise DataError("exact solution has zero norm")
    return math.sqrt(max(num, 0.0) / den)
