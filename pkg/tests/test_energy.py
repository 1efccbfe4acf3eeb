import numpy as np
import pytest

from calabiflow import DegenerateMetric, KahlerPotential, TwistData, envelope, legendre, ma_measure
from calabiflow.energy import (
    am,
    am_chi,
    am_gamma,
    entropy,
    kenergy,
    kenergy_gradient,
    twisted_kenergy,
    twisted_kenergy_alt,
)
from calabiflow.geometry import approximate_decreasing, cos_potential, random_potential
from calabiflow.metric import dp

A = 0.5
AM_HALF = -(A**2) / (16 * np.pi**2)
# int (1 - a cos) log(1 - a cos) dx by adaptive quadrature at 30 digits
ENT_TENTH = 0.002503135465769949743
ENT_HALF = 0.064638132020487443027


def cos2pi(grid):
    return np.cos(2 * np.pi * grid.nodes)


def test_am_trivial(grid, zero):
    assert am(zero) == 0.0
    assert am(zero + 1.3) == pytest.approx(1.3, abs=1e-15)


def test_am_cos_closed_form(u_half):
    # second differences carry a relative O(h^2) error
    assert am(u_half) == pytest.approx(AM_HALF, rel=1e-5)
    assert am(legendre(u_half)) == pytest.approx(AM_HALF, rel=1e-5)


def test_am_translation(grid, rng):
    u = random_potential(grid, rng)
    assert am(u + 0.2) == pytest.approx(am(u) + 0.2, abs=1e-14)


def test_am_gamma_trivial(grid, zero, u_half):
    assert am_gamma(u_half, np.zeros(grid.n_points)) == 0.0
    gamma = 1 + 0.5 * cos2pi(grid)
    assert am_gamma(zero + 2.0, gamma) == pytest.approx(2.0 * grid.integrate(gamma), abs=1e-13)


def test_am_gamma_difference(grid, rng):
    u, v = random_potential(grid, rng), random_potential(grid, rng)
    gamma = rng.normal(size=grid.n_points)
    direct = am_gamma(v, gamma) - am_gamma(u, gamma)
    assert direct == pytest.approx(grid.integrate((v.values - u.values) * gamma), abs=1e-8)


def test_am_gamma_symplectic_side(grid, rng):
    u = random_potential(grid, rng)
    gamma = 1 + 0.3 * np.sin(2 * np.pi * grid.nodes)
    assert am_gamma(legendre(u), gamma) == pytest.approx(am_gamma(u, gamma), abs=1e-6)


def test_am_chi_trivial(grid, zero, u_half):
    assert am_chi(u_half, TwistData.none(grid)) == 0.0
    assert am_chi(zero + 0.4, TwistData.uniform(grid, 1.0)) == pytest.approx(0.4, abs=1e-14)


def test_am_chi_two_formulas(grid, u_half):
    chi = TwistData(grid, np.ones(grid.n_points), cos2pi(grid))
    value = am_chi(u_half, chi)
    # int u dx = 0 and int cos (rho - 1) dx = -a/2
    assert value == pytest.approx(-A / 2, rel=1e-5)
    assert value == pytest.approx(am_gamma(u_half, chi.chi_density), abs=1e-6)
    assert am_chi(legendre(u_half), chi) == pytest.approx(value, abs=1e-6)


def test_entropy_trivial(grid, zero):
    f = np.zeros(grid.n_points)
    assert entropy(f, zero) == 0.0
    assert entropy(f, zero + 5.0) == 0.0


def test_entropy_cos_oracle(grid, u_tenth):
    value = entropy(np.zeros(grid.n_points), u_tenth)
    assert value == pytest.approx(ENT_TENTH, rel=0.05)
    assert value == pytest.approx(ENT_TENTH, rel=1e-4)
    assert value == pytest.approx(0.1**2 / 4, rel=0.05)


def test_entropy_symplectic_side(grid, u_half):
    f = 0.3 * cos2pi(grid)
    assert entropy(f, legendre(u_half)) == pytest.approx(entropy(f, u_half), abs=1e-5)


def test_entropy_sentinel(grid):
    u = envelope([KahlerPotential.constant(grid), cos_potential(grid, 0.5)])
    f = np.zeros(grid.n_points)
    assert np.isfinite(entropy(f, u))
    charged = np.flatnonzero(ma_measure(u).density > 0)
    f[charged[0]] = np.inf
    assert entropy(f, u) == np.inf


def test_kenergy(grid, zero, u_half):
    assert kenergy(zero) == 0.0
    assert kenergy(zero - 1.0) == 0.0
    assert kenergy(u_half) == pytest.approx(entropy(np.zeros(grid.n_points), u_half), abs=1e-12)
    assert kenergy(u_half) == pytest.approx(ENT_HALF, rel=1e-4)


def test_twisted_kenergy_examples(grid, zero, u_half):
    omega = TwistData.uniform(grid, 1.0)
    assert twisted_kenergy(zero, omega) == pytest.approx(0.0, abs=1e-15)
    assert twisted_kenergy(u_half, TwistData.none(grid)) == kenergy(u_half)
    assert twisted_kenergy(u_half, omega) == pytest.approx(twisted_kenergy_alt(u_half, omega), abs=1e-6)


def test_twisted_kenergy_smooth_f(grid, rng):
    u = random_potential(grid, rng)
    chi = TwistData(grid, 1.5 + 0.5 * cos2pi(grid), 0.02 * np.sin(2 * np.pi * grid.nodes))
    k = twisted_kenergy(u, chi)
    assert k == pytest.approx(twisted_kenergy_alt(u, chi), abs=1e-6)
    assert twisted_kenergy(legendre(u), chi) == pytest.approx(k, abs=1e-5)


def test_gradient_trivial(grid, zero):
    assert np.all(kenergy_gradient(zero, TwistData.none(grid)) == 0.0)
    assert np.max(np.abs(kenergy_gradient(zero, TwistData.uniform(grid, 1.0)))) < 1e-15


def test_gradient_directional_derivative(grid, u_tenth):
    chi = TwistData(grid, np.ones(grid.n_points), 0.01 * cos2pi(grid))
    rho = ma_measure(u_tenth).density
    grad = kenergy_gradient(u_tenth, chi)
    x = grid.nodes
    du = 0.01 * np.sin(2 * np.pi * x) + 0.004 * np.cos(6 * np.pi * x)
    pairing = grid.integrate(grad * du * rho)
    s = 1e-4
    plus = twisted_kenergy(KahlerPotential(grid, u_tenth.values + s * du), chi)
    minus = twisted_kenergy(KahlerPotential(grid, u_tenth.values - s * du), chi)
    fd = (plus - minus) / (2 * s)
    assert abs(pairing - fd) <= 1e-4 * abs(fd)


def test_gradient_degenerate(grid):
    u = envelope([KahlerPotential.constant(grid), cos_potential(grid, 0.5)])
    with pytest.raises(DegenerateMetric):
        kenergy_gradient(u, TwistData.none(grid))
    with pytest.raises(TypeError):
        kenergy_gradient(legendre(cos_potential(grid, 0.1)), TwistData.none(grid))


def test_twist_flags(grid):
    chi = TwistData(grid, np.ones(grid.n_points), 0.01 * cos2pi(grid))
    assert chi.positivity_flag and chi.strict_flag
    bad = TwistData(grid, np.zeros(grid.n_points), cos2pi(grid))
    assert not bad.positivity_flag
    assert TwistData.uniform(grid, 0.0).positivity_flag
    assert not TwistData.uniform(grid, 0.0).strict_flag
    assert TwistData.uniform(grid, 2.0).s_bar == -2.0
    with pytest.raises(ValueError):
        TwistData(grid, -np.ones(grid.n_points), np.zeros(grid.n_points))


def test_am_monotone(grid, rng):
    for _ in range(20):
        u = random_potential(grid, rng)
        v = envelope([u, random_potential(grid, rng)])
        assert am(v) <= am(u) + 1e-12


def test_am_difference_and_chain(grid, rng):
    for _ in range(20):
        u, v = random_potential(grid, rng), random_potential(grid, rng, shift=0.01)
        diff = u.values - v.values
        mu_u, mu_v = ma_measure(u).density, ma_measure(v).density
        delta = am(u) - am(v)
        assert delta == pytest.approx(0.5 * grid.integrate(diff * (mu_u + mu_v)), abs=1e-8)
        assert grid.integrate(diff * mu_u) <= delta + 1e-8
        assert delta <= grid.integrate(diff * mu_v) + 1e-8


def test_am_theta_chain(grid, rng):
    # AM_theta with theta = mu_psi: int (u - v) theta = AM_theta(u) - AM_theta(v) exactly in one dimension
    psi = random_potential(grid, rng)
    theta = ma_measure(psi).density
    u, v = random_potential(grid, rng), random_potential(grid, rng)
    delta = am_gamma(u, theta) - am_gamma(v, theta)
    assert delta == pytest.approx(grid.integrate((u.values - v.values) * theta), abs=1e-8)


def test_am_d1_lipschitz(grid, rng):
    for _ in range(20):
        u, v = random_potential(grid, rng), random_potential(grid, rng, shift=0.02 * rng.normal())
        assert abs(am(u) - am(v)) <= dp(u, v, 1) * (1 + 1e-6)


def test_am_domination(grid, rng):
    psi = random_potential(grid, rng)
    x = grid.nodes
    for width in (0.2, 0.05, 0.01):
        bump = np.exp(-0.5 * (((x - 0.37 + 0.5) % 1 - 0.5) / width) ** 2)
        scale = 1e-8 / grid.integrate(bump * ma_measure(psi).density)
        phi = KahlerPotential(grid, psi.values + scale * bump)
        gap = am(phi) - am(psi)
        assert 0 <= gap <= 1.01e-8
        assert np.max(phi.values - psi.values) <= 1e-3


@pytest.mark.parametrize("kinked,k_max", [(False, 40), (True, 70)])
def test_kenergy_lsc_along_decreasing(grid, zero, u_half, rng, kinked, k_max):
    # heat smoothing lowers entropy, so the values increase toward the limit
    chi = TwistData.uniform(grid, 1.0)
    u = envelope([zero, u_half]) if kinked else random_potential(grid, rng)
    values = np.array([twisted_kenergy(v, chi) for v in approximate_decreasing(u, k_max)])
    assert np.all(np.diff(values) >= -1e-12)
    assert values[-1] >= twisted_kenergy(u, chi) - 1e-6
