"""Spectral expansions over hyperbolic cross sets.

A :class:`SpectralField` stores coefficients ``c_n`` of
``U(x) = Σ_n c_n ∏_i J_{n_i}(x_i)`` with one :class:`~hcsolve.basis.BasisParams`
per dimension. Transforms work on the full tensor grid by sum factorization:
one small matrix product per axis instead of one product per index.
"""

from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import basis, sparse_index as si
from .basis import BasisParams, Family
from .exceptions import DataError

__all__ = [
    "SpectralField",
    "TensorGrid",
    "analyze",
    "analyze_values",
    "synthesize",
    "grid_values",
    "l2_norm",
    "reproject",
    "deriv_values",
    "xderiv_values",
    "write_snapshot",
    "read_snapshot",
    "full_tensor",
    "gather",
]


class SpectralField:
    """Coefficient vector aligned with the dictionary order of ``index_set``."""

    __slots__ = ("index_set", "params", "coeffs")

    def __init__(self, index_set: si.CrossIndexSet, params, coeffs):
        params = tuple(params)
        coeffs = np.array(coeffs, dtype=float).reshape(-1)
        if len(params) != index_set.d:
            raise ValueError(f"need {index_set.d} basis parameter sets, got {len(params)}")
        if len({p.family for p in params}) != 1:
            raise ValueError("all dimensions must share one basis family")
        if coeffs.size != len(index_set):
            raise ValueError(f"coefficient length {coeffs.size} does not match set size {len(index_set)}")
        if not np.all(np.isfinite(coeffs)):
            raise DataError("non-finite coefficient")
        coeffs.setflags(write=False)
        self.index_set = index_set
        self.params = params
        self.coeffs = coeffs

    @property
    def d(self):
        return self.index_set.d

    @property
    def N(self):
        return self.index_set.N

    @property
    def beta(self):
        return np.array([p.beta for p in self.params])

    @property
    def x0(self):
        return np.array([p.x0 for p in self.params])

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.index_set, self.params, coeffs)

    def __repr__(self):
        return f"SpectralField({self.index_set!r}, beta={self.beta.tolist()}, x0={self.x0.tolist()})"


@lru_cache(maxsize=256)
def _rule(Q, params: BasisParams):
    return basis.quad_rule(Q, params)


@lru_cache(maxsize=256)
def _tables(Q, params: BasisParams, n_max):
    rule = _rule(Q, params)
    vals = basis.eval_table(params, n_max, rule.nodes)
    vals.setflags(write=False)
    return vals


class TensorGrid:
    """Tensor product of per-dimension Gauss rules with cached basis tables.

    Parameters
    ----------
    n_max : int
        Highest degree tabulated in every dimension.
    params : sequence of BasisParams
    oversample : float
        Rule size per dimension is ``ceil(oversample * (n_max + 1))``.
    size : int, optional
        Explicit rule size overriding ``oversample``.
    """

    def __init__(self, n_max, params, oversample=2.0, size=None):
        self.n_max = int(n_max)
        self.params = tuple(params)
        self.Q = int(size) if size is not None else int(math.ceil(oversample * (self.n_max + 1)))
        self.rules = [_rule(self.Q, p) for p in self.params]
        self.tables = [_tables(self.Q, p, self.n_max) for p in self.params]

    @classmethod
    def for_field(cls, f: SpectralField, oversample=2.0):
        return cls(f.index_set.max_degree, f.params, oversample)

    @property
    def shape(self):
        return tuple(r.size for r in self.rules)

    @property
    def d(self):
        return len(self.rules)

    def axes(self):
        return [r.nodes for r in self.rules]

    def points(self) -> np.ndarray:
        """All grid points, shape ``(prod(shape), d)``, C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def weights(self) -> np.ndarray:
        w = self.rules[0].weights
        for r in self.rules[1:]:
            w = np.multiply.outer(w, r.weights)
        return w

    def integrate(self, values) -> float:
        return float(np.sum(self.weights() * np.asarray(values).reshape(self.shape)))


def apply_axes(tensor, mats):
    """Apply ``mats[i]`` (shape ``(a_i, b_i)``) along axis ``i``; ``None`` skips an axis."""
    out = tensor
    for i, m in enumerate(mats):
        if m is None:
            continue
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [i])), 0, i)
    return out


def full_tensor(index_set: si.CrossIndexSet, coeffs, n_max=None) -> np.ndarray:
    """Scatter sparse coefficients into a dense ``(n_max+1)^d`` tensor."""
    n_max = index_set.max_degree if n_max is None else n_max
    shape = (n_max + 1,) * index_set.d
    coeffs = np.asarray(coeffs)
    out = np.zeros(shape + coeffs.shape[1:], dtype=coeffs.dtype)
    if len(index_set):
        out[tuple(index_set.indices.T)] = coeffs
    return out


def gather(index_set: si.CrossIndexSet, tensor) -> np.ndarray:
    """Read the sparse-set entries back out of a dense tensor."""
    return np.array(tensor[tuple(index_set.indices.T)])


def analyze_values(values, index_set: si.CrossIndexSet, grid: TensorGrid) -> np.ndarray:
    """Coefficients ``<u, J_n>`` from samples on ``grid`` (shape ``grid.shape``)."""
    values = np.asarray(values, dtype=float).reshape(grid.shape)
    n_max = index_set.max_degree
    mats = [tab[: n_max + 1] * rule.weights for tab, rule in zip(grid.tables, grid.rules)]
    return gather(index_set, apply_axes(values, mats))


def analyze(sampler, index_set: si.CrossIndexSet, params, oversample=2.0) -> SpectralField:
    """Project a function onto the span of the set by tensor Gauss quadrature.

    ``sampler`` receives an array of points of shape ``(P, d)`` and returns
    ``P`` values.
    """
    params = tuple(params)
    grid = TensorGrid(index_set.max_degree, params, oversample)
    pts = grid.points()
    vals = np.asarray(sampler(pts), dtype=float).reshape(-1)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DataError(f"non-finite sample {vals[k]} at node {pts[k].tolist()}")
    return SpectralField(index_set, params, analyze_values(vals, index_set, grid))


def grid_values(f: SpectralField, grid: TensorGrid) -> np.ndarray:
    """Values of ``f`` on a tensor grid, shape ``grid.shape``."""
    n_max = f.index_set.max_degree
    if grid.n_max < n_max or grid.params != f.params:
        grid = TensorGrid(n_max, f.params, size=grid.Q)
    c = full_tensor(f.index_set, f.coeffs, n_max)
    return apply_axes(c, [tab[: n_max + 1].T for tab in grid.tables])


def _eval_points(f: SpectralField, points, deriv_axis=None, chunk=4096):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != f.d:
        raise ValueError(f"points must have {f.d} columns")
    n_max = f.index_set.max_degree
    idx = f.index_set.indices
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        p = points[start : start + chunk]
        prod = np.ones((idx.shape[0], p.shape[0]))
        for i, par in enumerate(f.params):
            if i == deriv_axis:
                tab = basis.deriv_table(par, n_max, p[:, i])
            else:
                tab = basis.eval_table(par, n_max, p[:, i])
            prod *= tab[idx[:, i]]
        out[start : start + chunk] = f.coeffs @ prod
    return out


def synthesize(f: SpectralField, points) -> np.ndarray:
    """Evaluate ``U`` at points of shape ``(P, d)``."""
    return _eval_points(f, points)


def deriv_values(f: SpectralField, i: int, points) -> np.ndarray:
    """Pointwise ``∂U/∂x_i``."""
    return _eval_points(f, points, deriv_axis=i)


def xderiv_values(f: SpectralField, i: int, points) -> np.ndarray:
    """Pointwise ``x_i ∂U/∂x_i``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return points[:, i] * deriv_values(f, i, points)


def l2_norm(f: SpectralField) -> float:
    """L² norm by Parseval."""
    return float(np.linalg.norm(f.coeffs))


def transfer_matrix(src: BasisParams, n_src: int, dst: BasisParams, n_dst: int, oversample=2.0):
    """1D matrix ``T[m, n] = <J_n^src, J_m^dst>`` by the destination rule."""
    if src == dst:
        out = np.zeros((n_dst + 1, n_src + 1))
        k = min(n_src, n_dst) + 1
        out[:k, :k] = np.eye(k)
        return out
    Q = int(math.ceil(oversample * (max(n_src, n_dst) + 1)))
    rule = _rule(Q, dst)
    d_tab = _tables(Q, dst, n_dst)
    s_tab = basis.eval_table(src, n_src, rule.nodes)
    return (d_tab * rule.weights) @ s_tab.T


def reproject(f: SpectralField, new_params, new_set: si.CrossIndexSet, oversample=2.0) -> SpectralField:
    """Orthogonal projection of ``f`` onto the span of another basis and set.

    Dimensions whose parameters do not change are handled exactly (coefficient
    truncation or zero padding); the others by one transfer matrix each.
    """
    new_params = tuple(new_params)
    if {p.family for p in new_params} != {f.params[0].family}:
        raise ValueError("reprojection cannot change the basis family")
    if new_params == f.params and new_set == f.index_set:
        return f
    n_src = f.index_set.max_degree
    n_dst = new_set.max_degree
    if new_params == f.params:
        pos = f.index_set.positions(new_set.indices)
        c = np.where(pos >= 0, f.coeffs[np.maximum(pos, 0)], 0.0)
        return SpectralField(new_set, new_params, c)
    mats = [
        transfer_matrix(s, n_src, t, n_dst, oversample) for s, t in zip(f.params, new_params)
    ]
    c = apply_axes(full_tensor(f.index_set, f.coeffs, n_src), mats)
    return SpectralField(new_set, new_params, gather(new_set, c))


# ---------------------------------------------------------------------------
# snapshot files

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(f: SpectralField, path):
    """Write a field to the text snapshot format (LF line endings)."""
    lines = [
        "# hcsolve field snapshot",
        f"d {f.d}",
        f"N {f.N}",
        f"gamma {f.index_set.gamma}" if f.index_set.gamma is si.FULL_TENSOR else f"gamma {_fmt(f.index_set.gamma)}",
    ]
    for i, p in enumerate(f.params):
        lines.append(
            f"dim {i} {p.family.value} {_fmt(p.alpha1)} {_fmt(p.alpha2)} {p.r} {_fmt(p.beta)} {_fmt(p.x0)}"
        )
    lines.append(f"size {len(f.index_set)}")
    for n, c in zip(f.index_set.tuples(), f.coeffs):
        lines.append(" ".join(str(k) for k in n) + " " + _fmt(c))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_snapshot(path) -> SpectralField:
    """Inverse of :func:`write_snapshot`."""
    header = {}
    dims = []
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] in ("d", "N", "gamma", "size"):
            header[parts[0]] = parts[1]
        elif parts[0] == "dim":
            fam, a1, a2, r, b, x0 = parts[2:8]
            dims.append(BasisParams(Family(fam), float(a1), float(a2), int(r), float(b), float(x0)))
        else:
            rows.append(parts)
    d = int(header["d"])
    gamma = si.FULL_TENSOR if header["gamma"] == "full" else float(header["gamma"])
    indices = [tuple(int(k) for k in r[:d]) for r in rows]
    coeffs = [float(r[d]) for r in rows]
    if len(indices) != int(header["size"]):
        raise DataError("snapshot size line does not match the coefficient count")
    s = si.CrossIndexSet(d, int(header["N"]), gamma, indices)
    return SpectralField(s, dims, coeffs)
