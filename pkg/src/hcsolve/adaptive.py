"""Frequency and exterior-error indicators and the moving, scaling and
p-adaptive procedures that retune a spectral field between time steps.

All procedures are pure: they take a field, a configuration and the
reference values of the previous call and return a new field and new
references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

from . import basis, field as fld, sparse_index as si
from .exceptions import DataError

__all__ = [
    "IndicatorMode",
    "AdaptiveConfig",
    "AdaptiveState",
    "freq_indicator",
    "order_indicator",
    "dt_freq_indicator",
    "dt_order_indicator",
    "exterior_nodes",
    "exterior_indicators",
    "indicators",
    "move_step",
    "scale_step",
    "order_step",
    "adapt",
]

# safety stop for the probe loops; each accepted probe changes β by a factor q
MAX_PROBES = 2000


class IndicatorMode(str, Enum):
    HYPERBOLIC = "Hyperbolic"
    DIRECT = "DirectTruncation"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for m in cls:
            if key in (m.value.lower(), m.name.lower()):
                return m
        raise ValueError(f"unknown indicator mode {value!r}")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Hyperparameters of the adaptive techniques.

    ``d_max`` is either one value for all dimensions or one per dimension.
    ``eta`` is the starting order threshold; ``None`` means ``eta0``.
    """

    delta: float = 0.01
    d_max: float | tuple = 0.2
    mu: float = 1.0005
    q_ratio: float = 0.99
    nu: float = 1.01
    n_max: int = 3
    eta: float | None = None
    eta0: float = 1.2
    sigma: float = 1.2
    budget: int | None = None
    indicator_mode: IndicatorMode = IndicatorMode.HYPERBOLIC
    enable_move: bool = True
    enable_scale: bool = True
    enable_order: bool = True

    def __post_init__(self):
        object.__setattr__(self, "indicator_mode", IndicatorMode.parse(self.indicator_mode))
        if isinstance(self.d_max, (list, tuple, np.ndarray)):
            object.__setattr__(self, "d_max", tuple(float(v) for v in self.d_max))
            dm = self.d_max
        else:
            object.__setattr__(self, "d_max", float(self.d_max))
            dm = (self.d_max,)
        if not 0.0 < self.q_ratio < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if min(dm) < 0:
            raise ValueError("d_max must be nonnegative")
        for name in ("mu", "nu", "eta0", "sigma"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be at least 1")
        if self.eta is not None and not self.eta >= 1.0:
            raise ValueError("eta must be at least 1")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError("n_max must be a nonnegative integer")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive")

    @classmethod
    def from_mapping(cls, values) -> "AdaptiveConfig":
        """Build from config-file keys; ``q`` is accepted for ``q_ratio``."""
        names = {f.name for f in fields(cls)}
        kw = {}
        for key, v in dict(values).items():
            name = "q_ratio" if key == "q" else key
            if name not in names:
                raise ValueError(f"unknown adaptive key {key!r}")
            kw[name] = v
        return cls(**kw)

    @property
    def direct(self) -> bool:
        return self.indicator_mode is IndicatorMode.DIRECT

    def d_max_for(self, i: int) -> float:
        if isinstance(self.d_max, tuple):
            return self.d_max[i] if i < len(self.d_max) else self.d_max[-1]
        return self.d_max


@dataclass(frozen=True)
class AdaptiveState:
    """Reference indicator values carried from one call to the next."""

    F0: tuple | None = None
    Fp0: float | None = None
    E0_L: tuple | None = None
    E0_R: tuple | None = None
    eta_current: float | None = None

    @classmethod
    def initial(cls, f: fld.SpectralField, config: AdaptiveConfig) -> "AdaptiveState":
        """References equal to the indicators of ``f``."""
        rec = indicators(f, config)
        eta = config.eta if config.eta is not None else config.eta0
        return cls(rec["F_x"], rec["F_p"], rec["E_L"], rec["E_R"], eta)

    @property
    def ready(self) -> bool:
        return None not in (self.F0, self.Fp0, self.E0_L, self.E0_R, self.eta_current)


# ---------------------------------------------------------------------------
# indicators

def _dropped_ratio(f: fld.SpectralField, keep) -> float:
    total = float(np.linalg.norm(f.coeffs))
    if total == 0.0:
        raise DataError("indicator undefined for a zero field")
    return min(1.0, float(np.linalg.norm(f.coeffs[~keep])) / total)


def freq_indicator(f: fld.SpectralField, i: int) -> float:
    """High-frequency share in dimension ``i`` on the hyperbolic cross."""
    return _dropped_ratio(f, f.index_set.scaling_mask(i))


def order_indicator(f: fld.SpectralField) -> float:
    """Share of the coefficients outside the two-thirds cross."""
    return _dropped_ratio(f, f.index_set.order_mask())


def dt_freq_indicator(f: fld.SpectralField, i: int) -> float:
    """Direct truncation variant: drops ``n_i > 2N/3``."""
    return _dropped_ratio(f, f.index_set.scaling_mask(i, direct=True))


def dt_order_indicator(f: fld.SpectralField) -> float:
    """Direct truncation variant: drops any ``n_j > 2N/3``."""
    return _dropped_ratio(f, f.index_set.order_mask(direct=True))


def _freq(f, i, config):
    return dt_freq_indicator(f, i) if config.direct else freq_indicator(f, i)


def _order(f, config):
    return dt_order_indicator(f) if config.direct else order_indicator(f)


def exterior_nodes(p: basis.BasisParams, N: int):
    """Nodes ``[N/3]`` and ``[(2N+2)/3]`` (zero-based) of the ``N+1``-point rule."""
    nodes = fld._rule(int(N) + 1, p).nodes
    return float(nodes[N // 3]), float(nodes[(2 * N + 2) // 3])


def _deriv_profile(f: fld.SpectralField, i: int):
    """Nodes and weighted ``∫|∂_i U|² dx_{others}`` on a ``4(N+1)``-point rule.

    The other directions are integrated exactly by orthonormality.
    """
    n_max = f.index_set.max_degree
    p = f.params[i]
    rule = fld._rule(4 * (f.N + 1), p)
    c = fld.full_tensor(f.index_set, f.coeffs, n_max)
    c = np.moveaxis(c, i, -1).reshape(-1, n_max + 1)
    v = c @ basis.deriv_table(p, n_max, rule.nodes)
    return rule.nodes, rule.weights * np.einsum("gq,gq->q", v, v)


def exterior_indicators(f: fld.SpectralField, i: int):
    """``(E_L, E_R)``: share of ``‖∂_i U‖`` beyond the outer third nodes."""
    nodes, prof = _deriv_profile(f, i)
    total = float(prof.sum())
    if total <= 0.0:
        return 0.0, 0.0
    xl, xr = exterior_nodes(f.params[i], f.N)
    el = math.sqrt(max(float(prof[nodes < xl].sum()), 0.0) / total)
    er = math.sqrt(max(float(prof[nodes > xr].sum()), 0.0) / total)
    return min(el, 1.0), min(er, 1.0)


def indicators(f: fld.SpectralField, config: AdaptiveConfig | None = None) -> dict:
    """All indicators of ``f`` under the configured mode."""
    config = config or AdaptiveConfig()
    ext = [exterior_indicators(f, i) for i in range(f.d)]
    return {
        "F_p": _order(f, config),
        "F_x": tuple(_freq(f, i, config) for i in range(f.d)),
        "E_L": tuple(e[0] for e in ext),
        "E_R": tuple(e[1] for e in ext),
    }


# ---------------------------------------------------------------------------
# procedures

def _params_with(f, i, **changes):
    out = list(f.params)
    out[i] = out[i].with_(**changes)
    return tuple(out)


def _ensure(f, config, state):
    if state is None or not state.ready:
        return AdaptiveState.initial(f, config)
    return state


def move_step(f: fld.SpectralField, config: AdaptiveConfig, state: AdaptiveState):
    """Shift the displacement ``x0`` toward the side with growing exterior error."""
    state = _ensure(f, config, state)
    delta, mu = config.delta, config.mu
    new_x0 = list(f.x0)
    for i in range(f.d):
        x0 = f.params[i].x0
        dmax = config.d_max_for(i)
        # each side probes from the unmoved field; the guard bounds the shift
        xl = x0
        el = exterior_indicators(f, i)[0]
        while el > mu * state.E0_L[i] and abs(xl - x0) <= dmax:
            xl -= delta
            probe = fld.reproject(f, _params_with(f, i, x0=xl), f.index_set)
            el = exterior_indicators(probe, i)[0]
        xr = x0
        er = exterior_indicators(f, i)[1]
        while er > mu * state.E0_R[i] and abs(xr - x0) <= dmax:
            xr += delta
            probe = fld.reproject(f, _params_with(f, i, x0=xr), f.index_set)
            er = exterior_indicators(probe, i)[1]
        new_x0[i] = xr + xl - x0
    moved = [i for i in range(f.d) if new_x0[i] != f.params[i].x0]
    if not moved:
        return f, state
    params = tuple(p.with_(x0=x) for p, x in zip(f.params, new_x0))
    g = fld.reproject(f, params, f.index_set)
    el, er = list(state.E0_L), list(state.E0_R)
    for i in moved:
        el[i], er[i] = exterior_indicators(g, i)
    return g, replace(state, E0_L=tuple(el), E0_R=tuple(er))


def scale_step(f: fld.SpectralField, config: AdaptiveConfig, state: AdaptiveState):
    """Adjust the scaling factor of every dimension whose high modes grew."""
    state = _ensure(f, config, state)
    q = config.q_ratio
    F0 = list(state.F0)
    new_beta = list(f.beta)

    def probe(i, b):
        return _freq(fld.reproject(f, _params_with(f, i, beta=b), f.index_set), i, config)

    for i in range(f.d):
        F = _freq(f, i, config)
        if not F > config.nu * F0[i]:
            continue
        beta = f.params[i].beta
        factor = q
        Ft = probe(i, beta * q)
        if not Ft < F:
            factor = 1.0 / q
            Ft = probe(i, beta / q)
        bt = beta
        for _ in range(MAX_PROBES):
            if not Ft < F:
                break
            bt *= factor
            F0[i] = F
            F = Ft
            Ft = probe(i, bt * factor)
        new_beta[i] = bt
    state = replace(state, F0=tuple(F0))
    if all(b == p.beta for b, p in zip(new_beta, f.params)):
        return f, state
    params = tuple(p.with_(beta=b) for p, b in zip(f.params, new_beta))
    return fld.reproject(f, params, f.index_set), state


def order_step(f: fld.SpectralField, config: AdaptiveConfig, state: AdaptiveState):
    """Raise or lower the expansion order ``N`` from the order indicator.

    Raises
    ------
    CapacityError
        If a candidate set exceeds ``config.budget``.
    """
    state = _ensure(f, config, state)
    s = f.index_set
    N = s.N
    eta = state.eta_current
    Fp = _order(f, config)
    g = f

    def at(n):
        new_set = si.build(s.d, n, s.gamma, config.budget)
        return fld.reproject(f, f.params, new_set)

    Nt = N
    if Fp > eta * state.Fp0:
        while Fp > eta * state.Fp0 and Nt < N + config.n_max:
            Nt += 1
            g = at(Nt)
            Fp = _order(g, config)
    elif Fp < state.Fp0 / config.eta0:
        # coarsen while the coarser field stays below the reference; the
        # last order that does is kept, so coarsening never lifts F_p0
        while Nt > 1:
            cand = at(Nt - 1)
            Fc = _order(cand, config)
            if not Fc < state.Fp0:
                break
            Nt, g, Fp = Nt - 1, cand, Fc
    if Nt > N:
        eta = config.sigma * eta
    return g, replace(state, Fp0=Fp, eta_current=eta)


def adapt(f: fld.SpectralField, config: AdaptiveConfig, state: AdaptiveState | None):
    """Moving, then scaling, then order adaptation; returns ``(field, state)``.

    References missing from ``state`` are taken from ``f`` itself.
    """
    state = _ensure(f, config, state)
    if config.enable_move:
        f, state = move_step(f, config, state)
    if config.enable_scale:
        f, state = scale_step(f, config, state)
    if config.enable_order:
        f, state = order_step(f, config, state)
    return f, state
