"""Fourier transforms of the reference basis functions (β = 1, x₀ = 0).

For a basis with symmetric weights each reference function ``g_n`` has parity
``(-1)^n``, so its transform is ``ĝ_n(η) = (-i)^{n mod 2} R_n(η)`` with ``R_n``
real and of parity ``(-1)^n``. Only ``η > 0`` is tabulated.

* Hermite functions are eigenfunctions of the transform:
  ``ĝ_n = √(2π) (-i)^n ψ_n``.
* Mapped Jacobi functions are transformed numerically. The half-line integral
  ``∫_0^∞ g_n(z) e^{-iηz} dz`` is split at ``Z0``: composite Gauss-Legendre
  panels sized to the local oscillation on ``[0, Z0]``, and for the
  algebraically decaying ``r = 1`` family the tail ``[Z0, ∞)`` is rotated onto
  the ray ``Z0 - i s`` where ``e^{-iηz}`` decays like ``e^{-ηs}``. ``g_n`` is
  analytic there (its branch points sit at ``±i``).

Convention: ``ĝ(η) = ∫ g(z) e^{-iηz} dz``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from . import basis
from .basis import BasisParams, Family
from .exceptions import UnsupportedError

__all__ = ["FourierTable", "fourier_table", "eta_rule", "reference_values"]

_GL_NODES = 20


@lru_cache(maxsize=None)
def _gl(n):
    x, w = roots_legendre(n)
    return x, w


def _panels(edges, n=_GL_NODES):
    """Gauss-Legendre nodes and weights on consecutive panels."""
    x, w = _gl(n)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def eta_rule(eta_max: float, width: float = 1.0, depth: int = 40):
    """Quadrature on ``(0, eta_max]``: dyadic panels towards 0, then uniform.

    The dyadic grading resolves the logarithmic behaviour of ``R_n`` at
    ``η = 0`` for slowly decaying bases.
    """
    small = [2.0**-k for k in range(depth, -1, -1)]
    n_uni = max(1, int(math.ceil((eta_max - 1.0) / width)))
    uni = np.linspace(1.0, max(eta_max, 1.0 + width), n_uni + 1)[1:]
    return _panels(np.concatenate([[0.0], small, uni]))


def reference_values(ref: BasisParams, n_max: int, z):
    """Reference functions ``g_n(z)`` (β = 1, x₀ = 0) at real or complex ``z``.

    Complex arguments use the analytic continuation through the principal
    square root, valid for ``Re z > 0`` away from the branch points ``±i``.
    """
    z = np.asarray(z)
    a = ref.alpha1
    e = 0.5 * (a + 1.0 + 0.5 * ref.r)
    if ref.r == 1:
        s = np.sqrt(1.0 + z * z)
        xi = z / s
        mu = (1.0 + z * z) ** (-e)
    else:
        xi = np.tanh(z)
        mu = np.cosh(z) ** (-2.0 * e)
    p = basis._jacobi_table(n_max, a, a, xi.astype(complex) if np.iscomplexobj(z) else xi)
    scale = np.exp([-0.5 * basis._log_norm_gamma(n, a, a) for n in range(n_max + 1)])
    return p * (scale.reshape((-1,) + (1,) * z.ndim) * mu)


def _real_panel_edges(ref, n_max, eta_max, z0, phase=10.0):
    edges = [0.0]
    z = 0.0
    while z < z0:
        if ref.r == 1:
            local = n_max / (1.0 + z * z)
        else:
            local = n_max / math.cosh(z)
        z = min(z0, z + phase / (local + eta_max + 1.0))
        edges.append(z)
    return np.array(edges)


def _mapped_transform(ref: BasisParams, n_max: int, eta: np.ndarray):
    if ref.alpha1 != ref.alpha2:
        raise UnsupportedError("fractional assembly needs alpha1 == alpha2")
    eta_max = float(eta.max())
    if ref.r == 1:
        z0 = max(20.0, 2.0 * n_max)
    else:
        # g_n decays like e^{-(α+1)z}; stop where it is below 1e-18
        z0 = (math.log(2.0) + 42.0) / (ref.alpha1 + 1.0)
    z, wz = _panels(_real_panel_edges(ref, n_max, eta_max, z0))
    g = reference_values(ref, n_max, z) * wz
    integral = np.zeros((n_max + 1, eta.size), dtype=complex)
    step = 512
    for k in range(0, eta.size, step):
        e = eta[k : k + step]
        integral[:, k : k + step] = g @ np.exp(-1j * np.outer(z, e))
    if ref.r == 1:
        integral += _ray_tail(ref, n_max, eta, z0)
    out = np.empty((n_max + 1, eta.size))
    out[0::2] = 2.0 * integral[0::2].real
    out[1::2] = -2.0 * integral[1::2].imag
    return out


def _ray_tail(ref, n_max, eta, z0):
    """``∫_{Z0}^∞ g_n(z) e^{-iηz} dz`` along ``z = Z0 - i s``."""
    out = np.zeros((n_max + 1, eta.size), dtype=complex)
    for k, e in enumerate(eta):
        s_max = 42.0 / e
        s0 = 0.25 * min(z0, 1.0 / e)
        edges = [0.0, s0]
        while edges[-1] < s_max:
            edges.append(min(s_max, 2.0 * edges[-1]))
        s, ws = _panels(edges)
        vals = reference_values(ref, n_max, z0 - 1j * s)
        out[:, k] = -1j * np.exp(-1j * e * z0) * (vals @ (ws * np.exp(-e * s)))
    return out


@dataclass(frozen=True, eq=False)
class FourierTable:
    """``R_n(η_k)`` on a positive half-line rule, for one reference basis.

    Attributes
    ----------
    eta, weights : ndarray
        Quadrature on ``(0, η_max]``.
    R : ndarray, shape (n_max+1, len(eta))
    """

    ref: BasisParams
    n_max: int
    eta: np.ndarray
    weights: np.ndarray
    R: np.ndarray

    def gram(self, multiplier) -> np.ndarray:
        """``(1/π) ∫_0^∞ R_m R_n m(η) dη`` with odd ``m+n`` entries set to zero."""
        out = (self.R * (self.weights * multiplier)) @ self.R.T / math.pi
        n = np.arange(self.n_max + 1)
        out[(n[:, None] + n[None, :]) % 2 == 1] = 0.0
        return out


def _reference(params: BasisParams) -> BasisParams:
    if params.family is Family.HERMITE:
        return BasisParams(Family.HERMITE, 0.0, 0.0, 0, 1.0, 0.0)
    return BasisParams(Family.MAPPED_JACOBI, params.alpha1, params.alpha2, params.r, 1.0, 0.0)


def _default_eta_max(ref, n_max):
    if ref.family is Family.HERMITE:
        return math.sqrt(2.0 * n_max + 1.0) + 12.0
    return 1.25 * n_max + 45.0


@lru_cache(maxsize=16)
def _table(ref: BasisParams, n_max: int, eta_max: float, width: float) -> FourierTable:
    eta, w = eta_rule(eta_max, width)
    if ref.family is Family.HERMITE:
        psi = basis.eval_table(ref, n_max, eta)
        sign = np.array([(-1.0) ** (n // 2) for n in range(n_max + 1)])
        R = math.sqrt(2.0 * math.pi) * sign[:, None] * psi
    else:
        R = _mapped_transform(ref, n_max, eta)
    R.setflags(write=False)
    return FourierTable(ref, n_max, eta, w, R)


def fourier_table(params: BasisParams, n_max: int, refine: int = 0) -> FourierTable:
    """Cached table for the reference basis of ``params``.

    ``n_max`` is rounded up to a multiple of 8 so that small order changes
    reuse the table. ``refine`` halves the η panel width that many times.
    """
    ref = _reference(params)
    n_max = int(8 * math.ceil((n_max + 1) / 8.0))
    eta_max = _default_eta_max(ref, n_max) * (1.0 + 0.25 * refine)
    return _table(ref, n_max, eta_max, 1.0 / 2**refine)
