"""scikit-learn style wrappers around the solvers.

``fit`` runs the numerics and stores fitted attributes with a trailing
underscore; ``predict`` evaluates the reconstructed solution.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .flux import get_model
from .grid import discretize_u0, eval_u_delta, eval_v_delta, integrate_u
from .periodic import effective_hamiltonian, find_periodic_u, sweep
from .scheme import SchemeConfig, solve
from .validation import (
    check_cell_averages,
    check_finite,
    check_grid,
    check_momenta,
    check_points,
    check_positive,
)


def _model(name: str, amplitude: float):
    return get_model(name) if name == "quadratic" else get_model(name, amplitude=amplitude)


class LaxFriedrichsSolver(BaseEstimator):
    """Initial-value solver; ``fit`` takes u0 as a callable or as N cell averages.

    ``predict`` maps (x, t) rows to u_Delta, ``predict_v`` to v_Delta.
    """

    def __init__(self, model="quadratic", amplitude=0.25, N=64, K=64, c=0.0, h=0.0, t_end=1.0, abort_on_cfl=True):
        self.model = model
        self.amplitude = amplitude
        self.N = N
        self.K = K
        self.c = c
        self.h = h
        self.t_end = t_end
        self.abort_on_cfl = abort_on_cfl

    def fit(self, X, y=None):
        grid = check_grid(self.N, self.K)
        t_end = check_positive(self.t_end, "t_end")
        cfg = SchemeConfig(
            _model(self.model, self.amplitude), grid, c=check_finite(self.c, "c"), h=check_finite(self.h, "h"),
            abort_on_cfl=self.abort_on_cfl,
        )
        u0 = X if callable(X) else check_cell_averages(X, grid.N)
        ufield = discretize_u0(grid, u0)
        k_end = int(np.ceil(t_end / grid.dt - 1e-9))
        self.config_ = cfg
        self.trajectory_ = solve(cfg, ufield, k_end)
        self.v_trajectory_ = solve(cfg, integrate_u(ufield), k_end)
        self.t_max_ = k_end * grid.dt
        return self

    def _query(self, X):
        check_is_fitted(self, "trajectory_")
        X = check_points(X)
        if np.any(X[:, 1] > self.t_max_ + 1e-12):
            raise ValueError(f"query time beyond the fitted horizon t={self.t_max_}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._query(X)
        out = np.empty(X.shape[0])
        for t in np.unique(X[:, 1]):
            sel = X[:, 1] == t
            out[sel] = eval_u_delta(self.trajectory_, X[sel, 0], t)
        return out

    def predict_v(self, X) -> np.ndarray:
        X = self._query(X)
        out = np.empty(X.shape[0])
        for t in np.unique(X[:, 1]):
            sel = X[:, 1] == t
            out[sel] = eval_v_delta(self.v_trajectory_, X[sel, 0], t)
        return out


class PeriodicSolver(BaseEstimator):
    """Space-time periodic state for one momentum; ``fit`` takes c."""

    def __init__(self, model="mechanical", amplitude=0.25, N=32, K=32, tol=1e-10, max_periods=1000):
        self.model = model
        self.amplitude = amplitude
        self.N = N
        self.K = K
        self.tol = tol
        self.max_periods = max_periods

    def fit(self, c, y=None):
        grid = check_grid(self.N, self.K)
        c = check_momenta(np.atleast_1d(c))
        if c.size != 1:
            raise ValueError("PeriodicSolver fits a single momentum")
        cfg = SchemeConfig(_model(self.model, self.amplitude), grid, c=float(c[0]))
        self.state_ = find_periodic_u(cfg, tol=check_positive(self.tol, "tol"), max_periods=self.max_periods)
        ev = effective_hamiltonian(self.state_, cfg, tol=self.tol)
        self.h_bar_ = ev.value
        self.h_bar_gap_ = ev.gap
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "state_")
        X = check_points(X)
        grid = self.state_.grid
        out = np.empty(X.shape[0])
        levels = np.array([grid.k_of(t) % grid.steps_per_period for t in X[:, 1]])
        for k in np.unique(levels):
            sel = levels == k
            out[sel] = eval_u_delta(self.state_.period, X[sel, 0], k * grid.dt)
        return out


class EffectiveHamiltonian(RegressorMixin, BaseEstimator):
    """h-bar on a c-grid; ``predict`` interpolates linearly inside the fitted range."""

    def __init__(self, model="mechanical", amplitude=0.25, N=32, K=64, tol=1e-11, max_periods=2000, n_jobs=1):
        self.model = model
        self.amplitude = amplitude
        self.N = N
        self.K = K
        self.tol = tol
        self.max_periods = max_periods
        self.n_jobs = n_jobs

    def fit(self, c, y=None):
        grid = check_grid(self.N, self.K)
        c = np.sort(check_momenta(c))
        cfg = SchemeConfig(_model(self.model, self.amplitude), grid)
        self.curve_ = sweep(cfg, c, tol=check_positive(self.tol, "tol"), max_periods=self.max_periods, n_jobs=self.n_jobs)
        if self.curve_.failures:
            raise RuntimeError(f"sweep failed at c = {sorted(self.curve_.failures)}")
        return self

    def predict(self, c) -> np.ndarray:
        check_is_fitted(self, "curve_")
        c = check_momenta(c)
        lo, hi = self.curve_.c[0], self.curve_.c[-1]
        if np.any((c < lo - 1e-12) | (c > hi + 1e-12)):
            raise ValueError(f"momenta outside the fitted range [{lo}, {hi}]")
        return np.interp(c, self.curve_.c, self.curve_.h_bar)
