"""Galerkin operators and the pseudospectral right-hand side.

The semidiscrete system is ``du/dt = -A u + F(u, t)`` with
``A[m, n] = a(J_n, J_m)`` and ``F_m = (f(U, t), J_m)``.

Local operators (mass, diffusion, advection, quadratic potential) are tensor
sums of 1D factor matrices, so on a sparse set they are sparse. The fractional
Laplacian is a Fourier multiplier ``|ω|^s``; in one dimension it is assembled
directly from the 1D transforms of :mod:`hcsolve.fourier`. In several
dimensions the multiplier is made separable by the subordination identity

    |ω|^s = (s/2)/Γ(1-s/2) ∫_0^∞ (1 - e^{-τ|ω|²}) τ^{-1-s/2} dτ,

which turns the operator into a τ-integral of Kronecker products of 1D heat
kernels ``G_i(τ)``.
"""

from __future__ import annotations

import hashlib
import math
import os
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from . import basis, field, fourier, sparse_index as si
from .basis import BasisParams, Family
from .exceptions import AccuracyError, DataError, UnsupportedError
from .field import SpectralField, TensorGrid, apply_axes, full_tensor, gather

__all__ = [
    "GalerkinOperator",
    "SubordinatedFractional",
    "NonlinearRHS",
    "factor_matrix",
    "assemble_mass",
    "assemble_diffusion",
    "assemble_advection",
    "assemble_potential",
    "assemble_fractional",
    "fractional_subordination",
    "conv_gradient_values",
    "antiderivative_table",
    "make_nonlinear_rhs",
    "cache_dir",
]

# dense assembly of the subordinated operator is used up to this set size
DENSE_LIMIT = 7000


class GalerkinOperator:
    """Matrix of a bilinear form on a sparse set.

    ``matrix`` is a dense array or a scipy sparse matrix.
    """

    def __init__(self, matrix, index_set, params, symmetric=False, label=""):
        n = len(index_set)
        if matrix.shape != (n, n):
            raise ValueError(f"operator shape {matrix.shape} does not match set size {n}")
        self.matrix = matrix
        self.index_set = index_set
        self.params = tuple(params)
        self.symmetric = bool(symmetric)
        self.label = label

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def matvec(self, v):
        return self.matrix @ v

    def __matmul__(self, v):
        return self.matvec(v)

    def scaled(self, c) -> "GalerkinOperator":
        return GalerkinOperator(c * self.matrix, self.index_set, self.params, self.symmetric, self.label)

    def __add__(self, other: "GalerkinOperator") -> "GalerkinOperator":
        if other.index_set is not self.index_set and other.index_set != self.index_set:
            raise ValueError("operators live on different index sets")
        if self.is_sparse and other.is_sparse:
            m = (self.matrix + other.matrix).tocsr()
        else:
            m = self.dense() + other.dense()
        label = "+".join(x for x in (self.label, other.label) if x)
        return GalerkinOperator(m, self.index_set, self.params, self.symmetric and other.symmetric, label)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"GalerkinOperator({self.label or 'unnamed'}, {kind}, size={self.shape[0]})"


# ---------------------------------------------------------------------------
# 1D factors

@lru_cache(maxsize=512)
def _factor(kind, params: BasisParams, n_max: int) -> np.ndarray:
    if kind == "mass":
        return np.eye(n_max + 1)
    if kind == "stiffness":
        rule = basis.quad_rule(n_max + 8, params)
        d = basis.deriv_table(params, n_max, rule.nodes)
        out = (d * rule.weights) @ d.T
        return 0.5 * (out + out.T)
    if kind == "advection":
        shift = 0.5 * params.r if params.family is Family.MAPPED_JACOBI else 0.0
        rule = basis.quad_rule(n_max + 8, params, shift=shift)
        v = basis.eval_table(params, n_max, rule.nodes)
        d = basis.deriv_table(params, n_max, rule.nodes)
        out = (v * rule.weights) @ d.T
        return 0.5 * (out - out.T)
    if kind == "potential":
        q = n_max + 4 if params.family is Family.HERMITE else 2 * n_max + 40
        rule = basis.quad_rule(min(q, basis.MAX_RULE_SIZE), params)
        v = basis.eval_table(params, n_max, rule.nodes)
        out = (v * (rule.weights * rule.nodes**2)) @ v.T
        return 0.5 * (out + out.T)
    raise ValueError(f"unknown factor kind {kind!r}")


def factor_matrix(kind: str, params: BasisParams, n_max: int) -> np.ndarray:
    """1D matrix ``M[m, n]`` of a local bilinear form.

    ``kind`` is ``mass`` (δ_mn), ``stiffness`` (∫J_m'J_n'), ``advection``
    (∫J_m J_n') or ``potential`` (∫x² J_m J_n).
    """
    out = _factor(kind, params, int(n_max)).copy()
    return out


def _tensor_sum(index_set: si.CrossIndexSet, factors) -> sp.csr_matrix:
    """Sparse ``Σ_i M_i ⊗ (identity in the other dimensions)`` on the set.

    ``factors`` is a list of ``(i, M_i)``.
    """
    idx = index_set.indices
    n = len(index_set)
    rows, cols, vals = [], [], []
    for i, m in factors:
        other = np.delete(idx, i, axis=1)
        # group members sharing all entries but the i-th
        if other.shape[1]:
            _, group = np.unique(other, axis=0, return_inverse=True)
            group = group.reshape(-1)
        else:
            group = np.zeros(n, dtype=np.int64)
        order = np.argsort(group, kind="stable")
        bounds = np.flatnonzero(np.diff(group[order])) + 1
        for members in np.split(order, bounds):
            k = idx[members, i]
            block = m[np.ix_(k, k)]
            r, c = np.nonzero(block)
            rows.append(members[r])
            cols.append(members[c])
            vals.append(block[r, c])
    if rows:
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    out = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    out.sum_duplicates()
    return out


def assemble_mass(index_set, params) -> GalerkinOperator:
    return GalerkinOperator(sp.identity(len(index_set), format="csr"), index_set, params, True, "mass")


def assemble_diffusion(index_set, params, coeff=1.0) -> GalerkinOperator:
    """``coeff · (∇u, ∇v)``, the weak form of ``-coeff Δu``."""
    n_max = index_set.max_degree
    factors = [(i, coeff * _factor("stiffness", p, n_max)) for i, p in enumerate(params)]
    return GalerkinOperator(_tensor_sum(index_set, factors), index_set, params, True, "diffusion")


def assemble_advection(index_set, params, v) -> GalerkinOperator:
    """``(v·∇u, w)`` for a constant velocity ``v``."""
    v = np.broadcast_to(np.asarray(v, dtype=float), (index_set.d,))
    n_max = index_set.max_degree
    factors = [(i, v[i] * _factor("advection", p, n_max)) for i, p in enumerate(params) if v[i] != 0]
    return GalerkinOperator(_tensor_sum(index_set, factors), index_set, params, False, "advection")


def assemble_potential(index_set, params, coeff=1.0) -> GalerkinOperator:
    """``coeff · (|x|² u, v)``."""
    n_max = index_set.max_degree
    factors = [(i, coeff * _factor("potential", p, n_max)) for i, p in enumerate(params)]
    return GalerkinOperator(_tensor_sum(index_set, factors), index_set, params, True, "potential")


# ---------------------------------------------------------------------------
# fractional Laplacian

def _check_order(s):
    s = float(s)
    if not 0.0 < s <= 2.0:
        raise ValueError(f"fractional order s must lie in (0, 2], got {s}")
    return s


def _tables_for(params, n_max, refine=0):
    return [fourier.fourier_table(p, n_max, refine) for p in params]


@lru_cache(maxsize=64)
def _converged_refine(ref_params: BasisParams, n_max: int, s: float) -> int:
    """Smallest refinement level whose 1D multiplier matrix is stable to 1e-6."""
    prev = None
    for level in range(4):
        t = fourier.fourier_table(ref_params, n_max, level)
        a = t.gram(t.eta**s)[: n_max + 1, : n_max + 1]
        if prev is not None:
            if np.max(np.abs(a - prev)) <= 1e-6 * np.max(np.abs(a)):
                return level - 1
        prev = a
    raise AccuracyError("fractional multiplier quadrature did not converge", estimate=prev)


def _refine_level(params, n_max, s):
    return max(_converged_refine(p.with_(beta=1.0, x0=0.0), n_max, s) for p in params)


def _direct_1d(index_set, p, s, refine):
    n_max = index_set.max_degree
    t = fourier.fourier_table(p, n_max, refine)
    a = p.beta**s * t.gram(t.eta**s)
    k = index_set.indices[:, 0]
    return a[np.ix_(k, k)]


class SubordinatedFractional:
    """Matrix-free fractional operator in any dimension.

    ``I - ⊗G_i`` is telescoped into ``Σ_i (G_1 ⊗ .. ⊗ G_{i-1}) ⊗ D_i`` with
    ``D_i = I - G_i`` formed from ``1 - e^{-τβ²η²}`` directly, which avoids
    cancellation at small ``τ``.

    Attributes
    ----------
    nodes : list of (weight, gs, ds)
        Trapezoid rule in ``log τ``; ``gs`` and ``ds`` hold ``G_i(τ)`` and
        ``D_i(τ)`` truncated to the set's degree.
    identity_weight, stiffness_weight : float
        Coefficients of the analytic tail at large ``τ`` and of the damped
        first-order term ``τ e^{-τ/τc} Σ K_i`` integrated exactly.
    """

    def __init__(self, index_set, params, s, refine=0, h=0.4):
        self.index_set = index_set
        self.params = tuple(params)
        self.s = s = _check_order(s)
        if s >= 2.0:
            raise ValueError("subordination needs s < 2")
        n_max = index_set.max_degree
        cut = slice(0, n_max + 1)
        tabs = _tables_for(self.params, n_max, refine)
        self.stiff = [p.beta**2 * t.gram(t.eta**2)[cut, cut] for p, t in zip(self.params, tabs)]
        scale = max(np.max(np.abs(k)) for k in self.stiff)
        const = 0.5 * s / math.gamma(1.0 - 0.5 * s)
        tau_c = 1.0 / scale
        u_min = -math.log(scale) - 24.0
        # slowly decaying transforms make G(τ) fall off like τ^{-1/2} only
        u_max = 60.0 / (0.5 + 0.5 * s) + 8.0
        m = int(math.ceil((u_max - u_min) / h))
        us = u_min + h * np.arange(m + 1)
        self.nodes = []
        damped = 0.0
        for j, u in enumerate(us):
            tau = math.exp(u)
            w = h * tau ** (-0.5 * s) * (0.5 if j in (0, m) else 1.0)
            gs, ds = [], []
            for p, t in zip(self.params, tabs):
                x = tau * (p.beta * t.eta) ** 2
                gs.append(t.gram(np.exp(-x))[cut, cut])
                ds.append(t.gram(-np.expm1(-x))[cut, cut])
            self.nodes.append((const * w, gs, ds))
            damped += w * tau * math.exp(-tau / tau_c)
        self.identity_weight = const * (2.0 / s) * math.exp(us[-1]) ** (-0.5 * s)
        exact = tau_c ** (1.0 - 0.5 * s) * math.gamma(1.0 - 0.5 * s)
        self.stiffness_weight = const * (exact - damped)
        self.tau_c = tau_c

    @property
    def shape(self):
        n = len(self.index_set)
        return (n, n)

    @staticmethod
    def _apply(c, mat, axis):
        out = np.tensordot(mat, c, axes=([1], [axis]))
        return np.moveaxis(out, 0, axis)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        idx = self.index_set
        c = full_tensor(idx, v)
        acc = np.zeros_like(c)
        for w, gs, ds in self.nodes:
            t = c
            for i in range(idx.d):
                acc += w * self._apply(t, ds[i], i)
                if i + 1 < idx.d:
                    t = self._apply(t, gs[i], i)
        out = self.identity_weight * v + gather(idx, acc)
        for i, k in enumerate(self.stiff):
            out += self.stiffness_weight * gather(idx, self._apply(c, k, i))
        return out

    def __matmul__(self, v):
        return self.matvec(v)

    def dense(self) -> np.ndarray:
        idx = self.index_set.indices
        n, d = idx.shape
        # same[i]: members agree in every dimension after i
        same = [np.ones((n, n), dtype=bool) for _ in range(d)]
        for i in range(d - 2, -1, -1):
            col = idx[:, i + 1]
            same[i] = same[i + 1] & (col[:, None] == col[None, :])
        pairs = [np.ix_(idx[:, i], idx[:, i]) for i in range(d)]
        out = self.identity_weight * np.eye(n)
        for w, gs, ds in self.nodes:
            prefix = None
            for i in range(d):
                term = ds[i][pairs[i]]
                if prefix is not None:
                    term = term * prefix
                out += w * np.where(same[i], term, 0.0)
                g = gs[i][pairs[i]]
                prefix = g if prefix is None else prefix * g
        for i, k in enumerate(self.stiff):
            mask = np.ones((n, n), dtype=bool)
            for j in range(d):
                if j != i:
                    mask &= idx[:, j][:, None] == idx[:, j][None, :]
            out += self.stiffness_weight * np.where(mask, k[pairs[i]], 0.0)
        return 0.5 * (out + out.T)


def fractional_subordination(index_set, params, s, refine=None) -> SubordinatedFractional:
    """Matrix-free operator of ``(-Δ)^{s/2}`` on the set (any dimension)."""
    params = tuple(params)
    _check_symmetric(params)
    if refine is None:
        refine = _refine_level(params, index_set.max_degree, _check_order(s))
    return SubordinatedFractional(index_set, params, s, refine)


def _check_symmetric(params):
    for p in params:
        if p.family is Family.MAPPED_JACOBI and p.alpha1 != p.alpha2:
            raise UnsupportedError("fractional assembly supports alpha1 == alpha2 only")


def cache_dir() -> Path:
    """Operator cache location, ``$HCSOLVE_CACHE_DIR`` or ``~/.cache/hcsolve``."""
    env = os.environ.get("HCSOLVE_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "hcsolve"


def _cache_key(term, index_set, params, s):
    text = f"{term}|{index_set.key}|{[str(p) + repr((p.alpha1, p.alpha2, p.beta, p.x0)) for p in params]}|{s!r}"
    return hashlib.sha1(text.encode()).hexdigest()[:20], text


def _cache_load(key, n):
    path = cache_dir() / f"op_{key}.txt"
    if not path.exists():
        return None
    try:
        lines = path.read_text().splitlines()
        out = np.zeros((n, n))
        for line in lines:
            if line.startswith("#"):
                continue
            i, j, v = line.split()
            out[int(i), int(j)] = float(v)
        return out
    except (OSError, ValueError, IndexError):
        return None


def _cache_store(key, text, matrix):
    directory = cache_dir()
    try:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"op_{key}.txt"
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        i, j = np.nonzero(matrix)
        body = "\n".join(f"{a} {b} {matrix[a, b]:.17g}" for a, b in zip(i, j))
        tmp.write_text(f"# {text}\n{body}\n", newline="\n")
        os.replace(tmp, path)
    except OSError:
        pass


def assemble_fractional(index_set, params, s, use_cache=False) -> GalerkinOperator:
    """Dense matrix of ``((-Δ)^{s/2} J_n, J_m)``.

    One dimension uses the 1D multiplier integral directly; more dimensions
    use the subordinated form. ``s = 2`` reduces to the diffusion operator.
    """
    params = tuple(params)
    s = _check_order(s)
    _check_symmetric(params)
    if s == 2.0 and index_set.d > 1:
        return assemble_diffusion(index_set, params, 1.0)
    if use_cache:
        key, text = _cache_key("fractional", index_set, params, s)
        hit = _cache_load(key, len(index_set))
        if hit is not None:
            return GalerkinOperator(hit, index_set, params, True, "fractional")
    refine = _refine_level(params, index_set.max_degree, s)
    if index_set.d == 1:
        a = _direct_1d(index_set, params[0], s, refine)
    else:
        if len(index_set) > DENSE_LIMIT:
            raise UnsupportedError(
                f"dense fractional assembly limited to {DENSE_LIMIT} basis functions"
            )
        a = SubordinatedFractional(index_set, params, s, refine).dense()
    a = 0.5 * (a + a.T)
    if use_cache:
        _cache_store(key, text, a)
    return GalerkinOperator(a, index_set, params, True, "fractional")


# ---------------------------------------------------------------------------
# convolution flux

def _jacobi_side_rule(m, a, lo_singular, left, right):
    """Gauss rule on [left, right] for a weight singular at one endpoint."""
    t, w = roots_jacobi(m, 0.0, a) if lo_singular else roots_jacobi(m, a, 0.0)
    half = 0.5 * (right - left)
    x = left + half * (t + 1.0)
    return x, w * half ** (1.0 + a)


@lru_cache(maxsize=64)
def _antiderivative(params: BasisParams, n_max: int, Q: int):
    """``(∫_{-∞}^{x_k} J_n, ∫_ℝ J_n)`` at the nodes of the ``Q``-point rule."""
    rule = field._rule(Q, params)
    x = rule.nodes
    m = n_max + 24
    cum = np.zeros((n_max + 1, x.size))
    if params.family is Family.HERMITE:
        t_lo = -(math.sqrt(2.0 * n_max + 1.0) + 12.0)
        tk = params.beta * (x - params.x0)
        gl, gw = np.polynomial.legendre.leggauss(m)
        for k, t_end in enumerate(tk):
            if t_end <= t_lo:
                continue
            edges = np.linspace(t_lo, t_end, int(math.ceil((t_end - t_lo) / 2.0)) + 1)
            a, b = edges[:-1, None], edges[1:, None]
            tt = (0.5 * (b - a) * gl + 0.5 * (b + a)).ravel()
            ww = (0.5 * (b - a) * gw).ravel()
            vals = basis.eval_table(params.with_(beta=1.0, x0=0.0), n_max, tt)
            cum[:, k] = vals @ ww / math.sqrt(params.beta)
        total_t = np.linspace(t_lo, -t_lo, 40)
        a, b = total_t[:-1, None], total_t[1:, None]
        tt = (0.5 * (b - a) * gl + 0.5 * (b + a)).ravel()
        ww = (0.5 * (b - a) * gw).ravel()
        total = basis.eval_table(params.with_(beta=1.0, x0=0.0), n_max, tt) @ ww / math.sqrt(params.beta)
        return cum, total
    # mapped family: ∫ J_n dx = ∫ P_n μ / h' dξ; μ/h' = β^{-1/2}(1-ξ)^{a1}(1+ξ)^{a2}
    r = params.r
    a1 = 0.5 * (params.alpha1 + 1.0 + 0.5 * r) - 1.0 - 0.5 * r
    a2 = 0.5 * (params.alpha2 + 1.0 + 0.5 * r) - 1.0 - 0.5 * r
    if a1 <= -1.0 or a2 <= -1.0:
        raise UnsupportedError("basis functions are not integrable for these exponents")
    scale = np.exp([-0.5 * basis._log_norm_gamma(n, params.alpha1, params.alpha2) for n in range(n_max + 1)])
    scale = scale[:, None] / math.sqrt(params.beta)

    def poly(xi):
        return basis._jacobi_table(n_max, params.alpha1, params.alpha2, xi)

    xi_all, w_all = roots_jacobi(m, a1, a2)
    total = (poly(xi_all) @ w_all) * scale[:, 0]
    xi_nodes = basis.map_forward(params.beta, r, x - params.x0)
    for k, xk in enumerate(np.atleast_1d(xi_nodes)):
        if xk <= 0.0:
            s_, w_ = _jacobi_side_rule(m, a2, True, -1.0, xk)
            f = (1.0 - s_) ** a1
            cum[:, k] = (poly(s_) * f) @ w_ * scale[:, 0]
        else:
            s_, w_ = _jacobi_side_rule(m, a1, False, xk, 1.0)
            f = (1.0 + s_) ** a2
            cum[:, k] = total - (poly(s_) * f) @ w_ * scale[:, 0]
    return cum, total


def antiderivative_table(params: BasisParams, n_max: int, Q: int):
    """Cumulative integrals of the basis at the nodes of the ``Q``-point rule."""
    cum, total = _antiderivative(params, int(n_max), int(Q))
    return cum.copy(), total.copy()


def conv_gradient_values(f: SpectralField, grid: TensorGrid) -> np.ndarray:
    """``∂_x(|x| * U)`` at the grid nodes, ``= 2∫_{-∞}^x U - ∫_ℝ U``.

    The cumulative integral is taken of the expansion itself, term by term,
    so the result is exact for every member of the span.
    """
    if f.d != 1:
        raise UnsupportedError("the convolution flux is implemented in one dimension")
    n_max = f.index_set.max_degree
    cum, total = _antiderivative(f.params[0], n_max, grid.Q)
    k = f.index_set.indices[:, 0]
    return 2.0 * (f.coeffs @ cum[k]) - f.coeffs @ total[k]


# ---------------------------------------------------------------------------
# pseudospectral right-hand side

class NonlinearRHS:
    """``F(ũ, t)_m = (f(U, x, t) + g(x, t), J_m)`` by quadrature.

    The problem object supplies ``reaction(u, x, t) -> (f, ∂f/∂u)`` when
    ``has_reaction``, a source ``source(x, t)`` (``None`` if absent), an
    optional ``source_coeffs(index_set, params, t)`` override, and for the
    chemotaxis flux ``has_flux`` with coefficient ``flux_coeff`` ``κ`` giving
    ``F = -κ (U ∂_x(|x| * U), J_m')``.
    """

    def __init__(self, problem, index_set, params, oversample=2.0):
        self.problem = problem
        self.index_set = index_set
        self.params = tuple(params)
        self.grid = TensorGrid(index_set.max_degree, self.params, oversample)
        n_max = index_set.max_degree
        idx = index_set.indices
        # per-dimension tables restricted to the set's degrees
        self._mats = [tab[: n_max + 1] * rule.weights for tab, rule in zip(self.grid.tables, self.grid.rules)]
        self._synth = [tab[: n_max + 1].T for tab in self.grid.tables]
        self._points = None
        self._source_cache = {}
        self.has_reaction = bool(getattr(problem, "has_reaction", False))
        self.has_flux = bool(getattr(problem, "has_flux", False))
        self.is_affine = not (self.has_reaction or self.has_flux)
        self._phi = None
        if self.has_flux:
            if index_set.d != 1:
                raise UnsupportedError("the convolution flux is implemented in one dimension")
            k = idx[:, 0]
            nodes = self.grid.rules[0].nodes
            self._vals = self.grid.tables[0][k]
            self._dvals = basis.deriv_table(self.params[0], n_max, nodes)[k]
            cum, total = _antiderivative(self.params[0], n_max, self.grid.Q)
            self._conv = 2.0 * cum[k] - total[k][:, None]

    @property
    def points(self):
        if self._points is None:
            self._points = self.grid.points()
        return self._points

    def values(self, coeffs):
        return apply_axes(full_tensor(self.index_set, coeffs), self._synth).reshape(-1)

    def project(self, values):
        return gather(self.index_set, apply_axes(np.asarray(values).reshape(self.grid.shape), self._mats))

    def source(self, t):
        key = float(t)
        hit = self._source_cache.get(key)
        if hit is not None:
            return hit
        out = None
        hook = getattr(self.problem, "source_coeffs", None)
        if hook is not None:
            out = hook(self.index_set, self.params, key)
        if out is None:
            g = self.problem.source(self.points, key)
            if g is not None:
                g = np.asarray(g, dtype=float)
                _check_finite(g, self.points)
                out = self.project(g)
        if out is None:
            out = np.zeros(len(self.index_set))
        if len(self._source_cache) > 64:
            self._source_cache.clear()
        self._source_cache[key] = out
        return out

    def __call__(self, coeffs, t):
        coeffs = np.asarray(coeffs, dtype=float)
        out = self.source(t).copy()
        if self.has_reaction:
            u = self.values(coeffs)
            f, _ = self.problem.reaction(u, self.points, t)
            _check_finite(f, self.points)
            out += self.project(f)
        if self.has_flux:
            out += self._flux(coeffs)
        return out

    def _flux(self, coeffs):
        kappa = self.problem.flux_coeff
        w = self.grid.rules[0].weights
        u = coeffs @ self._vals
        c = coeffs @ self._conv
        return -kappa * (self._dvals @ (w * u * c))

    def jacobian(self, coeffs, t):
        """Exact Galerkin Jacobian ``∂F/∂ũ``; ``None`` when ``F`` is affine."""
        if self.is_affine:
            return None
        coeffs = np.asarray(coeffs, dtype=float)
        n = len(self.index_set)
        out = np.zeros((n, n))
        if self.has_reaction:
            u = self.values(coeffs)
            _, fu = self.problem.reaction(u, self.points, t)
            out += self._weighted_gram(np.asarray(fu, dtype=float))
        if self.has_flux:
            kappa = self.problem.flux_coeff
            w = self.grid.rules[0].weights
            u = coeffs @ self._vals
            c = coeffs @ self._conv
            # d/dc_n of -κ Σ_k w_k u_k c_k J_m'(x_k)
            out += -kappa * (self._dvals * w) @ (self._vals * c + self._conv * u).T
        return out

    def _weighted_gram(self, weight):
        """``Φᵀ diag(W ⊙ weight) Φ`` with ``Φ`` the synthesis matrix on the grid."""
        idx = self.index_set.indices
        tabs = self.grid.tables
        w = self.grid.weights().reshape(-1) * weight.reshape(-1)
        d = self.index_set.d
        if d == 1:
            phi = tabs[0][idx[:, 0]]
            return (phi * w) @ phi.T
        if self._phi is None:
            phi = tabs[0][idx[:, 0]]
            for i in range(1, d):
                phi = (phi[:, :, None] * tabs[i][idx[:, i]][:, None, :]).reshape(len(idx), -1)
            self._phi = phi
        return (self._phi * w) @ self._phi.T


def _check_finite(values, points):
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if np.any(bad):
        k = int(np.argmax(bad.reshape(-1)))
        raise DataError(f"non-finite right-hand side value at node {points[k].tolist()}")


def make_nonlinear_rhs(problem, index_set, params, oversample=2.0) -> NonlinearRHS:
    """Pseudospectral evaluator of the nonlinear and source terms."""
    return NonlinearRHS(problem, index_set, params, oversample)
