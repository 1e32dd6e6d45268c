"""Implicit Runge-Kutta time stepping for ``du/dt = -A u + F(u, t)``.

Stages are solved by a simplified Newton iteration whose Jacobian
``I - dt (a ⊗ J)`` is frozen at the start of the step. Diagonalising the
Butcher matrix ``a = T Λ T⁻¹`` splits it into ``q`` independent solves with
``I - dt λ_k J``; complex conjugate eigenvalues share one factorisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NewtonError

__all__ = [
    "IRKTableau",
    "NewtonControl",
    "StepInfo",
    "IRKStepper",
    "gauss_tableau",
    "step",
    "stability_matrix",
    "dt_bound",
]

# dense complex LU above this size is replaced by GMRES for matrix-free operators
DENSE_SOLVE_LIMIT = 4000


@dataclass(frozen=True, eq=False)
class IRKTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        q = b.size
        if a.shape != (q, q) or c.shape != (q,) or q < 1:
            raise ValueError("tableau shapes are inconsistent")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("weights b must sum to 1")
        if np.max(np.abs(a.sum(axis=1) - c)) > 1e-12:
            raise ValueError("row sums of a must equal c")
        for name, v in (("a", a), ("b", b), ("c", c)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def stages(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class NewtonControl:
    abs_tol: float = 1e-10
    max_iters: int = 50
    damping: float = 1.0

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class StepInfo:
    iterations: int = 0
    residual: float = 0.0
    refreshes: int = 0
    history: list = dc_field(default_factory=list)


def gauss_tableau(stages: int = 2) -> IRKTableau:
    """Collocation tableau at the Gauss-Legendre points of [0, 1]."""
    q = int(stages)
    if q not in (1, 2, 3):
        raise ValueError(f"Gauss tableaus are provided for 1 to 3 stages, got {stages}")
    x, w = np.polynomial.legendre.leggauss(q)
    c = 0.5 * (x + 1.0)
    b = 0.5 * w
    # a[i, j] = ∫_0^{c_i} l_j, from Σ_j a_ij c_j^k = c_i^{k+1} / (k+1)
    k = np.arange(q)
    vand = c[None, :] ** k[:, None]
    rhs = c[None, :] ** (k[:, None] + 1) / (k[:, None] + 1)
    a = np.linalg.solve(vand, rhs).T
    # the defining identities hold exactly; clean rounding in them
    c_exact = a.sum(axis=1)
    return IRKTableau(a, b / b.sum(), c_exact)


def stability_matrix(tableau: IRKTableau):
    """``M_rs = a_rs b_r + a_sr b_s - b_r b_s`` and its smallest eigenvalue."""
    a, b = tableau.a, tableau.b
    m = a * b[:, None] + a.T * b[None, :] - np.outer(b, b)
    m = 0.5 * (m + m.T)
    return m, float(np.linalg.eigvalsh(m).min())


def dt_bound(c0: float, C0: float, L: float, tableau: IRKTableau) -> float:
    """Step size bound ``c0 / (4√2 L (C0 + L) C_ab)``; ``inf`` when ``L = 0``."""
    a, b = tableau.a, tableau.b
    cab = math.sqrt(float(np.sum(a**2 * b[:, None] / b[None, :])))
    denom = 4.0 * math.sqrt(2.0) * L * (C0 + L) * cab
    return math.inf if denom == 0.0 else c0 / denom


# ---------------------------------------------------------------------------
# operator plumbing

def _apply(A, v):
    if A is None:
        return np.zeros_like(v)
    if hasattr(A, "matvec"):
        return A.matvec(v)
    return A @ v


def _as_matrix(A, n):
    """Sparse or dense matrix for ``A``; ``None`` when only a matvec exists."""
    if A is None:
        return sp.csr_matrix((n, n))
    if sp.issparse(A):
        return A.tocsr()
    if isinstance(A, np.ndarray):
        return A
    inner = getattr(A, "matrix", None)
    if inner is not None:
        return inner.tocsr() if sp.issparse(inner) else np.asarray(inner)
    return None


def _rhs_jacobian(F, u, t):
    if F is None or getattr(F, "is_affine", False):
        return None
    jac = getattr(F, "jacobian", None)
    if jac is None:
        return _fd_jacobian(F, u, t)
    return jac(u, t)


def _fd_jacobian(F, u, t):
    n = u.size
    f0 = F(u, t)
    h = 1e-7 * (1.0 + np.linalg.norm(u))
    out = np.empty((n, n))
    for j in range(n):
        e = u.copy()
        e[j] += h
        out[:, j] = (F(e, t) - f0) / h
    return out


class _Solver:
    """Solves ``(I - dt λ J) x = r`` for one eigenvalue ``λ``."""

    def __init__(self, A, JF, lam, dt, n):
        self.n = n
        z = dt * lam
        mat = _as_matrix(A, n)
        if mat is None:
            self._setup_iterative(A, JF, z)
            return
        jf_dense = JF is not None and JF.ndim == 2
        if sp.issparse(mat) and not jf_dense:
            m = sp.identity(n, dtype=complex, format="csc") + z * mat.astype(complex).tocsc()
            if JF is not None:
                m = m - z * sp.diags(JF.astype(complex), format="csc")
            self._lu = spla.splu(m.tocsc())
            self.solve = self._lu.solve
            return
        dense = mat.toarray() if sp.issparse(mat) else mat
        m = np.eye(n, dtype=complex) + z * dense
        if JF is not None:
            m -= z * (np.diag(JF) if JF.ndim == 1 else JF)
        self._lu = la.lu_factor(m, check_finite=False)
        self.solve = lambda r: la.lu_solve(self._lu, r, check_finite=False)

    def _setup_iterative(self, A, JF, z):
        n = self.n
        jf = JF

        def mv(x):
            re = _apply(A, x.real) + 1j * _apply(A, x.imag)
            out = x + z * re
            if jf is not None:
                out -= z * (jf * x if jf.ndim == 1 else jf @ x)
            return out

        op = spla.LinearOperator((n, n), matvec=mv, dtype=complex)

        def solve(r):
            scale = np.linalg.norm(r)
            if scale == 0.0:
                return np.zeros(n, dtype=complex)
            x, info = spla.gmres(op, r, rtol=1e-13, atol=0.0, restart=60, maxiter=200)
            if info != 0:
                res = np.linalg.norm(mv(x) - r)
                if res > 1e-8 * scale:
                    raise NewtonError("linear stage solve did not converge", res)
            return x

        self.solve = solve


class IRKStepper:
    """Gauss IRK stepper with a reusable linear-solver cache.

    For affine right-hand sides the stage matrix only depends on ``A`` and
    ``dt`` and its factorisation is reused across steps.
    """

    def __init__(self, tableau: IRKTableau | None = None, control: NewtonControl | None = None):
        self.tableau = tableau or gauss_tableau(2)
        self.control = control or NewtonControl()
        lam, T = np.linalg.eig(self.tableau.a)
        self._lam = lam
        self._T = T
        self._Tinv = np.linalg.inv(T)
        self._pairs = self._conjugate_pairs(lam, T)
        self._cache_key = None
        self._cache = None

    @staticmethod
    def _conjugate_pairs(lam, T):
        """``partner[k] = j`` when stage system ``k`` is the conjugate of ``j``."""
        partner = {}
        for k in range(lam.size):
            if lam[k].imag >= 0 or k in partner:
                continue
            for j in range(lam.size):
                if j != k and j not in partner and abs(lam[j] - lam[k].conjugate()) < 1e-12:
                    if np.allclose(T[:, j], T[:, k].conjugate(), atol=1e-12):
                        partner[k] = j
                    break
        return partner

    def reset(self):
        self._cache_key = None
        self._cache = None

    def _solvers(self, A, JF, dt, n, affine):
        key = (id(A), float(dt), n) if affine else None
        if key is not None and key == self._cache_key:
            return self._cache
        solvers = {}
        for k in range(self._lam.size):
            if k not in self._pairs:
                solvers[k] = _Solver(A, JF, self._lam[k], dt, n)
        if key is not None:
            self._cache_key, self._cache = key, solvers
        return solvers

    def step(self, A, F, u, t, dt):
        """Advance ``u`` from ``t`` to ``t + dt``; returns ``(u_new, StepInfo)``."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        u = np.asarray(u, dtype=float)
        n = u.size
        tab, ctl = self.tableau, self.control
        q = tab.stages
        times = [t + ci * dt for ci in tab.c]

        def G(w, s):
            out = -_apply(A, w)
            if F is not None:
                out = out + F(w, times[s])
            return out

        affine = F is None or bool(getattr(F, "is_affine", False))
        JF = _rhs_jacobian(F, u, t)
        solvers = self._solvers(A, JF, dt, n, affine)

        W = np.tile(u, (q, 1))
        info = StepInfo()
        g = np.array([G(W[s], s) for s in range(q)])
        R = W - u - dt * (tab.a @ g)
        res = float(np.linalg.norm(R))
        info.history.append(res)
        damping = ctl.damping
        prev = res
        while res >= ctl.abs_tol:
            if info.iterations >= ctl.max_iters or not np.isfinite(res):
                raise NewtonError(
                    f"Newton iteration did not converge in {info.iterations} iterations "
                    f"(residual {res:.3e})",
                    res,
                )
            rhs = self._Tinv @ (-R)
            V = np.empty((q, n), dtype=complex)
            for k in range(q):
                if k in self._pairs:
                    continue
                V[k] = solvers[k].solve(rhs[k].astype(complex))
            for k, j in self._pairs.items():
                V[k] = V[j].conjugate()
            dW = (self._T @ V).real
            W = W + damping * dW
            damping = min(1.0, 2.0 * damping)
            info.iterations += 1
            g = np.array([G(W[s], s) for s in range(q)])
            R = W - u - dt * (tab.a @ g)
            res = float(np.linalg.norm(R))
            info.history.append(res)
            if not affine and res > 0.5 * prev and info.iterations > 1:
                # slow contraction: refresh the Jacobian at the stage mean
                JF = _rhs_jacobian(F, W.mean(axis=0), t + 0.5 * dt)
                solvers = self._solvers(A, JF, dt, n, False)
                info.refreshes += 1
            prev = res
        info.residual = res
        return u + dt * (tab.b @ g), info


def step(A, F, u, t, dt, tableau=None, control=None):
    """One IRK step of ``du/dt = -A u + F(u, t)``; returns the new vector."""
    return IRKStepper(tableau, control).step(A, F, u, t, dt)[0]
