"""Hyperbolic cross index sets and the indicator subsets.

A multi-index ``n`` belongs to ``Υ_{N,γ}`` when

    |n|_mix · |n|_∞^{-γ} <= N^{1-γ},     |n|_mix = ∏ max(1, n_i),

with the zero index always included. ``γ = 0`` is the standard hyperbolic
cross and ``γ → -∞`` (the :data:`FULL_TENSOR` sentinel) the full tensor grid.
Indices are stored in dictionary (lexicographic) order. Dimensions are
numbered from zero.
"""

from __future__ import annotations

import hashlib
import math
from fractions import Fraction
from functools import cached_property

import numpy as np

from .exceptions import CapacityError

__all__ = [
    "FULL_TENSOR",
    "CrossIndexSet",
    "mix_norm",
    "inf_norm",
    "build",
    "scaling_subset",
    "order_subset",
    "dt_scaling_subset",
    "dt_order_subset",
]


class _FullTensor:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "FULL_TENSOR"

    def __str__(self):
        return "full"

    def __reduce__(self):
        return (_FullTensor, ())


FULL_TENSOR = _FullTensor()


def mix_norm(n) -> int:
    return math.prod(max(1, int(k)) for k in n)


def inf_norm(n) -> int:
    return max(int(k) for k in n) if len(n) else 0


def _within(values, gamma, threshold) -> bool:
    """Membership test for (possibly scaled) entries against a threshold."""
    top = max(values)
    if top == 0:
        return True
    if gamma is FULL_TENSOR:
        return top <= threshold
    mix = math.prod(max(1, v) for v in values)
    g = float(gamma)
    if g.is_integer():
        g = int(g)
        return Fraction(mix) * Fraction(top) ** (-g) <= Fraction(threshold) ** (1 - g)
    lhs = math.log(mix) - g * math.log(top)
    rhs = (1.0 - g) * math.log(threshold)
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def _check_gamma(gamma):
    if gamma is FULL_TENSOR or gamma == "full":
        return FULL_TENSOR
    g = float(gamma)
    if not g < 1.0:
        raise ValueError(f"gamma must be < 1, got {g}")
    return g


class CrossIndexSet:
    """Immutable multi-index set in dictionary order.

    Attributes
    ----------
    d, N : int
        Dimension and expansion order.
    gamma : float or FULL_TENSOR
    indices : ndarray of int, shape (len, d)
    """

    def __init__(self, d, N, gamma, indices):
        self.d = int(d)
        self.N = int(N)
        self.gamma = _check_gamma(gamma)
        arr = np.asarray(indices, dtype=np.int64).reshape(-1, self.d)
        arr.setflags(write=False)
        self.indices = arr
        self._pos = {tuple(int(k) for k in row): i for i, row in enumerate(arr)}

    def __len__(self):
        return self.indices.shape[0]

    def __iter__(self):
        return iter(self.tuples())

    def __contains__(self, n):
        return tuple(int(k) for k in n) in self._pos

    def __eq__(self, other):
        return (
            isinstance(other, CrossIndexSet)
            and self.d == other.d
            and self.N == other.N
            and self.gamma == other.gamma
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"CrossIndexSet(d={self.d}, N={self.N}, gamma={self.gamma}, size={len(self)})"

    def tuples(self):
        return list(self._pos)

    def position_of(self, n):
        """Dictionary-order rank of ``n``, or ``None`` when absent."""
        return self._pos.get(tuple(int(k) for k in n))

    def positions(self, other_indices):
        """Ranks of many indices; -1 marks absent entries."""
        return np.array([self._pos.get(tuple(int(k) for k in n), -1) for n in other_indices], dtype=np.int64)

    @cached_property
    def key(self) -> str:
        h = hashlib.sha1(self.indices.tobytes())
        h.update(f"{self.d}|{self.N}|{self.gamma!r}".encode())
        return h.hexdigest()[:16]

    @cached_property
    def max_degree(self) -> int:
        return int(self.indices.max()) if len(self) else 0

    def _mask(self, predicate):
        return np.array([predicate(n) for n in self.tuples()], dtype=bool)

    @cached_property
    def _scaling_masks(self):
        out = []
        for i in range(self.d):
            def pred(n, i=i):
                v = [Fraction(k) for k in n]
                v[i] *= Fraction(3, 2)
                return _within(v, self.gamma, self.N)
            out.append(self._mask(pred))
        return out

    @cached_property
    def _order_mask(self):
        thr = Fraction(2, 3) * self.N
        return self._mask(lambda n: _within(n, self.gamma, thr))

    @cached_property
    def _dt_scaling_masks(self):
        lim = Fraction(2, 3) * self.N
        return [self.indices[:, i] <= lim for i in range(self.d)]

    @cached_property
    def _dt_order_mask(self):
        lim = Fraction(2, 3) * self.N
        return np.all(self.indices <= lim, axis=1) if len(self) else np.zeros(0, bool)

    def scaling_mask(self, i, direct=False):
        return (self._dt_scaling_masks if direct else self._scaling_masks)[i]

    def order_mask(self, direct=False):
        return self._dt_order_mask if direct else self._order_mask


def build(d: int, N: int, gamma, budget: int | None = None) -> CrossIndexSet:
    """Enumerate ``Υ_{N,γ}`` by depth-first search with prefix pruning.

    Raises
    ------
    CapacityError
        If the set has more than ``budget`` members.
    """
    d, N = int(d), int(N)
    if d < 1:
        raise ValueError("dimension must be positive")
    if N < 1:
        raise ValueError("order N must be at least 1")
    gamma = _check_gamma(gamma)
    out = []
    prefix = [0] * d

    def rec(pos):
        for k in range(N + 1):
            prefix[pos] = k
            # the remaining entries are zero; by downward closure a failing
            # prefix rules out every larger k as well
            if not _within(prefix, gamma, N):
                break
            if pos == d - 1:
                out.append(tuple(prefix))
                if budget is not None and len(out) > budget:
                    raise CapacityError(
                        f"hyperbolic cross d={d}, N={N}, gamma={gamma} exceeds budget {budget}"
                    )
            else:
                rec(pos + 1)
        prefix[pos] = 0

    rec(0)
    return CrossIndexSet(d, N, gamma, out)


def _select(s: CrossIndexSet, mask):
    return [n for n, keep in zip(s.tuples(), mask) if keep]


def scaling_subset(s: CrossIndexSet, i: int):
    """Members whose entry ``i`` scaled by 3/2 still satisfies the cross condition."""
    return _select(s, s.scaling_mask(i))


def order_subset(s: CrossIndexSet):
    """Members satisfying the cross condition with threshold ``(2N/3)^{1-γ}``."""
    return _select(s, s.order_mask())


def dt_scaling_subset(s: CrossIndexSet, i: int):
    """Members with ``n_i <= 2N/3``."""
    return _select(s, s.scaling_mask(i, direct=True))


def dt_order_subset(s: CrossIndexSet):
    """Members with every entry ``<= 2N/3``."""
    return _select(s, s.order_mask(direct=True))
