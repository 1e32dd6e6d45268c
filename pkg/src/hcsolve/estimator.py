"""scikit-learn style wrapper around a simulation run."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import field
from .adaptive import AdaptiveConfig
from .cli import RunConfig, run

__all__ = ["HyperbolicCrossSolver"]


class HyperbolicCrossSolver(RegressorMixin, BaseEstimator):
    """Solve a built-in problem to ``T``; ``predict`` evaluates ``U(x, T)``.

    There is nothing to learn from data: ``fit`` integrates the PDE and
    ignores ``X`` and ``y``. ``score`` is the R² of ``U(·, T)`` against
    reference values, which makes the solver usable with model-selection
    utilities over basis and adaptivity settings.

    Parameters
    ----------
    problem : str
        Name from ``problems.list_problems()``.
    adaptive : dict, AdaptiveConfig or None
        Adaptivity settings; ``None`` takes the problem's defaults and
        ``False`` switches every technique off.
    """

    def __init__(self, problem="ex1", N=None, gamma=None, beta=None, x0=None, dt=None, T=None,
                 stages=2, adaptive=None, oversample=2.0, use_cache=True):
        self.problem = problem
        self.N = N
        self.gamma = gamma
        self.beta = beta
        self.x0 = x0
        self.dt = dt
        self.T = T
        self.stages = stages
        self.adaptive = adaptive
        self.oversample = oversample
        self.use_cache = use_cache

    def _run_config(self):
        a = self.adaptive
        if a is False:
            a = AdaptiveConfig(enable_move=False, enable_scale=False, enable_order=False)
        elif isinstance(a, dict):
            a = AdaptiveConfig.from_mapping(a)
        seq = lambda v: None if v is None else tuple(np.atleast_1d(v).astype(float))
        return RunConfig(
            problem=self.problem, N=self.N, gamma=self.gamma, beta=seq(self.beta), x0=seq(self.x0),
            dt=self.dt, T=self.T, stages=self.stages, adaptive=a, oversample=self.oversample,
            use_cache=self.use_cache,
        )

    def fit(self, X=None, y=None):
        record = run(self._run_config())
        self.field_ = record.field
        self.history_ = record.rows
        self.final_error_ = record.final_error
        self.n_features_in_ = self.field_.d
        return self

    def predict(self, X):
        check_is_fitted(self, "field_")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.field_.d)
        if X.shape[1] != self.field_.d:
            raise ValueError(f"X has {X.shape[1]} features, the problem has {self.field_.d}")
        return field.synthesize(self.field_, X)
