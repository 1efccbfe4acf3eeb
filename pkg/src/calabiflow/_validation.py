"""Input checks shared by the estimator classes."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import PshViolation
from .geometry import PeriodicGrid, psi_tol


def check_potentials(X, min_points=8):
    """2-D float array of potential samples, one potential per row, psh-valid."""
    X = check_array(X, dtype=np.float64, ensure_min_features=min_points)
    grid = PeriodicGrid(X.shape[1])
    rho = 1.0 + (np.roll(X, 1, axis=1) - 2 * X + np.roll(X, -1, axis=1)) / grid.spacing**2
    bad = np.flatnonzero(rho.min(axis=1) < -psi_tol(grid.n_points))
    if len(bad):
        raise PshViolation(f"row {bad[0]} has 1 + D2u < 0")
    return X, grid


def check_densities(X, min_points=8):
    X = check_array(X, dtype=np.float64, ensure_min_features=min_points)
    if np.any(X < 0):
        raise ValueError("densities must be nonnegative")
    return X, PeriodicGrid(X.shape[1])


def check_grid_match(X, n_points):
    if X.shape[1] != n_points:
        raise ValueError(f"X has {X.shape[1]} columns, the estimator was fitted with {n_points}")
