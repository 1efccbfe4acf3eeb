import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from calabiflow import (
    AsymptoticCenter,
    CalabiFlow,
    EntropyApproximator,
    LegendreTransformer,
    MongeAmpereSolver,
    PeriodicGrid,
    PshViolation,
)
from calabiflow.geometry import cos_potential, random_potential


@pytest.fixture
def X(rng):
    grid = PeriodicGrid(256)
    return np.vstack([random_potential(grid, rng).values for _ in range(3)])


def test_params_and_clone():
    est = CalabiFlow(tau=0.05, n_steps=10)
    assert est.get_params()["tau"] == 0.05
    other = clone(est).set_params(n_steps=3)
    assert other.n_steps == 3 and est.n_steps == 10


def test_legendre_roundtrip(X):
    lt = LegendreTransformer().fit(X)
    phi = lt.transform(X)
    assert phi.shape == X.shape
    assert np.max(np.abs(lt.inverse_transform(phi) - X)) <= 20 / 256**2


def test_not_fitted(X):
    with pytest.raises(NotFittedError):
        LegendreTransformer().transform(X)


def test_grid_mismatch(X, rng):
    lt = LegendreTransformer().fit(X)
    other = random_potential(PeriodicGrid(128), rng).values[None, :]
    with pytest.raises(ValueError):
        lt.transform(other)


def test_rejects_non_psh():
    X = 0.1 * np.cos(2 * np.pi * np.arange(64) / 64)[None, :]
    with pytest.raises(PshViolation):
        LegendreTransformer().fit(X)


def test_monge_ampere_solver():
    grid = PeriodicGrid(256)
    rho = 1 - 0.5 * np.cos(2 * np.pi * grid.nodes)
    u = MongeAmpereSolver().fit_transform(rho[None, :])[0]
    expected = cos_potential(grid, 0.5).values + 0.5**2 / (8 * np.pi**2)
    assert np.max(np.abs(u - expected)) < 1e-6
    phi = MongeAmpereSolver(eps=0.01).fit_transform(rho[None, :])[0]
    assert np.max(np.abs(phi - u)) <= 0.02


def test_calabi_flow(X):
    est = CalabiFlow(tau=1e-2, n_steps=100).fit(X)
    assert len(est.trajectories_) == 3
    final = est.transform(X)
    assert np.max(np.ptp(final, axis=1)) <= 1e-3
    assert list(est.predict(X)) == ["Converged"] * 3
    for lim, row in zip(est.limits(), X):
        assert lim is not None and np.ptp(lim) < 1e-8


def test_pipeline(X):
    pipe = make_pipeline(CalabiFlow(n_steps=20), LegendreTransformer())
    assert pipe.fit_transform(X).shape == X.shape


def test_entropy_approximator():
    grid = PeriodicGrid(256)
    X = cos_potential(grid, 0.3).values[None, :]
    out = EntropyApproximator().fit_transform(X)
    assert np.max(np.abs(out - X)) < 1e-3


def test_asymptotic_center(rng):
    grid = PeriodicGrid(256)
    u, v = random_potential(grid, rng), random_potential(grid, rng)
    est = AsymptoticCenter().fit(np.vstack([u.values, v.values] * 4))
    assert est.radius_ > 0
    assert est.predict().shape == (256,)
