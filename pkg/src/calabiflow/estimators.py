"""scikit-learn style wrappers.

Each row of ``X`` is one potential (or density) sampled on the uniform grid
i / n_features.  The estimators are thin shells around the functional API.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_densities, check_grid_match, check_potentials
from .cat0 import PotentialSequence, asymptotic_center
from .energy import TwistData
from .flow import Converged, FlowConfig, dichotomy_classify, run_flow
from .exceptions import Inconclusive
from .geometry import (
    DensityMeasure,
    KahlerPotential,
    PeriodicGrid,
    SymplecticPotential,
    inverse_legendre,
    legendre,
)
from .masolver import approximate_with_entropy, solve_ma, solve_ma_eps


class LegendreTransformer(TransformerMixin, BaseEstimator):
    """Kahler potentials u to periodic parts phi of their Legendre duals, and back."""

    def fit(self, X, y=None):
        X, grid = check_potentials(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X, grid = check_potentials(X)
        check_grid_match(X, self.n_features_in_)
        return np.vstack([legendre(KahlerPotential(grid, row)).periodic_part for row in X])

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        check_grid_match(X, self.n_features_in_)
        grid = PeriodicGrid(X.shape[1])
        return np.vstack([inverse_legendre(SymplecticPotential.from_periodic(grid, row)).values for row in X])


class MongeAmpereSolver(TransformerMixin, BaseEstimator):
    """Densities to potentials solving 1 + u'' = rho (eps=None) or 1 + u'' = e^{eps u} rho."""

    def __init__(self, eps=None):
        self.eps = eps

    def fit(self, X, y=None):
        X, _ = check_densities(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X, grid = check_densities(X)
        check_grid_match(X, self.n_features_in_)
        out = []
        for row in X:
            mu = DensityMeasure(grid, row)
            u = solve_ma(mu) if self.eps is None else solve_ma_eps(mu, self.eps)
            out.append(u.values)
        return np.vstack(out)


class CalabiFlow(TransformerMixin, BaseEstimator):
    """Proximal Calabi flow from each row; ``transform`` returns the final iterates.

    The twist is beta = twist_mass dx with f = 0.  ``predict`` returns the
    dichotomy label of each run.
    """

    def __init__(self, tau=1e-2, n_steps=200, twist_mass=0.0, prox_tol=1e-10):
        self.tau = tau
        self.n_steps = n_steps
        self.twist_mass = twist_mass
        self.prox_tol = prox_tol

    def _config(self, grid):
        twist = TwistData.uniform(grid, self.twist_mass) if self.twist_mass else None
        return FlowConfig(tau=self.tau, n_steps=self.n_steps, twist=twist, prox_tol=self.prox_tol)

    def _run(self, X):
        X, grid = check_potentials(X)
        config = self._config(grid)
        return [run_flow(KahlerPotential(grid, row), config) for row in X]

    def fit(self, X, y=None):
        self.trajectories_ = self._run(X)
        self.n_features_in_ = self.trajectories_[0].grid.n_points
        return self

    def transform(self, X):
        check_is_fitted(self)
        check_grid_match(np.atleast_2d(X), self.n_features_in_)
        trajectories = self._run(X)
        return np.vstack([t.potentials[-1].values for t in trajectories])

    def predict(self, X):
        check_is_fitted(self)
        labels = []
        for traj in self._run(X):
            try:
                labels.append(dichotomy_classify(traj).label)
            except Inconclusive:
                labels.append("Inconclusive")
        return np.array(labels)

    def limits(self):
        """Detected limits of the fitted runs (None for non-converged runs)."""
        check_is_fitted(self)
        out = []
        for traj in self.trajectories_:
            label = dichotomy_classify(traj)
            out.append(inverse_legendre(label.limit).values if isinstance(label, Converged) else None)
        return out


class EntropyApproximator(TransformerMixin, BaseEstimator):
    """Replace each potential by the last element of its entropy-convergent approximation."""

    def __init__(self, f_amplitude=0.0, stall=1e-6):
        self.f_amplitude = f_amplitude
        self.stall = stall

    def fit(self, X, y=None):
        X, _ = check_potentials(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X, grid = check_potentials(X)
        check_grid_match(X, self.n_features_in_)
        f_ref = self.f_amplitude * np.cos(2 * np.pi * grid.nodes)
        self.steps_ = [approximate_with_entropy(KahlerPotential(grid, row), f_ref, stall=self.stall) for row in X]
        return np.vstack([s[-1].potential.values for s in self.steps_])


class AsymptoticCenter(BaseEstimator):
    """Asymptotic center of the rows of X read as a sequence."""

    def __init__(self, tail_window=None):
        self.tail_window = tail_window

    def fit(self, X, y=None):
        X, grid = check_potentials(X)
        seq = PotentialSequence([KahlerPotential(grid, row) for row in X])
        center, radius = asymptotic_center(seq, self.tail_window)
        self.center_ = center.values
        self.radius_ = radius
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X=None):
        check_is_fitted(self)
        return self.center_.copy()
