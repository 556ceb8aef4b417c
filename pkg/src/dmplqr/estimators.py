"""scikit-learn style wrappers around the functional API.

``BalancedTruncation`` is a transformer mapping plant states to reduced
coordinates, ``SectorBoundRegressor`` fits the sector-bound form on
``(tau, T)`` features and ``DmpDesigner`` runs the whole design study and
predicts deployed control inputs for given states.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dmp import DEFAULT_RHO, DEFAULT_TAU_G
from .errors import ValidationError
from .pipeline import DEFAULT_ORDERS, StudyConfig, run_study
from .reduction import build_reduced_model
from .riccati import solve_care
from .sector import SectorSample, deployed_gain, fit_sector_bound
from .systems import CostSpec, LtiSystem


def _as_system(system):
    if not isinstance(system, LtiSystem):
        raise ValidationError(f"expected an LtiSystem, got {type(system).__name__}")
    return system


class BalancedTruncation(TransformerMixin, BaseEstimator):
    """Balanced truncation of a plant, with unstable modes kept exactly.

    Parameters
    ----------
    order : int
        Reduced state dimension.
    """

    def __init__(self, order=3):
        self.order = order

    def fit(self, X, y=None, cost=None):
        """Reduce the plant ``X`` (an ``LtiSystem``); ``cost`` defaults to identity weights."""
        system = _as_system(X)
        cost = CostSpec.identity(system.n_x, system.n_u) if cost is None else cost
        care = solve_care(system.A, system.B, cost.Q, cost.R)
        self.model_ = build_reduced_model(system, cost, self.order, care.P)
        self.U_, self.V_ = self.model_.U, self.model_.V
        self.L_M_, self.alpha_ = self.model_.L_M, self.model_.alpha
        self.n_features_in_ = system.n_x
        return self

    def transform(self, X):
        """Reduced coordinates ``z = U^T x`` for each row of ``X``."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} state columns, got {X.shape[1]}")
        return X @ self.U_

    def inverse_transform(self, Z):
        """Lift reduced coordinates back with ``x = V z``."""
        check_is_fitted(self, "model_")
        Z = check_array(Z)
        return Z @ self.V_.T


class SectorBoundRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``C1 tau [+ C1q tau^2] + (C2 + C3 tau) exp(-alpha T) + L_M``.

    ``X`` has two columns, sampling time and horizon; ``y`` is the sector gain.
    """

    def __init__(self, alpha_i=1.0, L_M=0.0, form="linear"):
        self.alpha_i = alpha_i
        self.L_M = L_M
        self.form = form

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if X.shape[1] != 2:
            raise ValidationError("X must have two columns: tau and T")
        samples = [SectorSample(float(t), float(T), float(v), float(v)) for (t, T), v in zip(X, y)]
        self.fit_ = fit_sector_bound(samples, self.alpha_i, self.L_M, self.form, "baseline")
        self.coef_ = np.array([self.fit_.C1, self.fit_.C1q, self.fit_.C2, self.fit_.C3])
        self.alpha_ = self.fit_.alpha_used
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_array(X)
        return self.fit_.evaluate(X[:, 0], X[:, 1])


class DmpDesigner(BaseEstimator):
    """Select model order, sampling time and horizon for a plant.

    After ``fit`` the chosen design is exposed as ``model_``, ``tau_opt_``,
    ``T_opt_`` and the full-state deployed gain ``K_``; ``predict`` returns
    the held control input ``K x`` for each state row.
    """

    def __init__(self, orders=DEFAULT_ORDERS, rho=DEFAULT_RHO, tau_g=DEFAULT_TAU_G, tau_min=1e-4, tau_max=0.04,
                 n_grid=2000, n_samples=10, sample_seed=0, fit_form="fitted_alpha"):
        self.orders = orders
        self.rho = rho
        self.tau_g = tau_g
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.n_grid = n_grid
        self.n_samples = n_samples
        self.sample_seed = sample_seed
        self.fit_form = fit_form

    def fit(self, X, y=None, cost=None):
        system = _as_system(X)
        cfg = StudyConfig(tuple(self.orders), self.rho, self.tau_g, self.tau_min, self.tau_max, self.n_grid,
                          self.n_samples, self.sample_seed, self.fit_form)
        self.study_ = run_study(system, cost, cfg)
        self.solution_ = self.study_.winner
        self.infeasible_ = self.solution_.infeasible
        self.n_features_in_ = system.n_x
        if not self.infeasible_:
            res = self.study_.result(self.solution_.model_index)
            self.model_ = res.model
            self.tau_opt_ = self.solution_.tau_opt
            self.T_opt_ = self.solution_.T_opt
            self.K_ = deployed_gain(res.model, self.study_.cost, self.tau_opt_, self.tau_g).K_dep
        return self

    def predict(self, X):
        check_is_fitted(self, "study_")
        if self.infeasible_:
            raise ValidationError("no feasible design; nothing to deploy")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} state columns, got {X.shape[1]}")
        return X @ self.K_.T
