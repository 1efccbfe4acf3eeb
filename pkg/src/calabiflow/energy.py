"""Energy functionals: AM, AM_gamma, AM_chi, entropy, K-energy and its twisted version.

Every functional accepts a potential in either representation.  On a
:class:`KahlerPotential` the defining integrals are evaluated directly with
rho = 1 + D2 u.  On a :class:`SymplecticPotential` the same quantities are
rewritten in moment coordinates, where g'' = 1/rho and x = g'(p):

    AM        = -int phi dp
    int u dx  = -int phi dp + 1/2 int phi'^2 dp
    Ent       = -int log g'' dp + int f(p + phi') dp

so every term is exactly convex along straight lines in g when the twist is
nonnegative.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DegenerateMetric
from .geometry import (
    KahlerPotential,
    PeriodicGrid,
    SymplecticPotential,
    psi_tol,
)

RHO_MIN = 1e-6
RHO_FLOOR = 1e-300


def periodic_spline(grid, values):
    """Periodic cubic spline through grid samples, evaluated modulo 1."""
    x = np.append(grid.nodes, 1.0)
    y = np.append(values, values[0])
    spline = CubicSpline(x, y, bc_type="periodic")

    def evaluate(t, nu=0):
        return spline(np.mod(t, 1.0), nu)

    return evaluate


@dataclass(frozen=True)
class TwistData:
    """Twist chi = beta + i ddbar f given by the density b of beta and the potential f."""

    grid: PeriodicGrid
    beta_density: np.ndarray = field(repr=False)
    f_values: np.ndarray = field(repr=False)
    eps_chi: float = 1e-6

    def __post_init__(self):
        for name in ("beta_density", "f_values"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n_points,):
                raise ValueError(f"{name} must have {self.grid.n_points} samples")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.beta_density < 0):
            raise ValueError("beta_density must be nonnegative")

    @classmethod
    def none(cls, grid):
        return cls(grid, np.zeros(grid.n_points), np.zeros(grid.n_points))

    @classmethod
    def uniform(cls, grid, m):
        return cls(grid, np.full(grid.n_points, float(m)), np.zeros(grid.n_points))

    @property
    def mass(self):
        return self.grid.integrate(self.beta_density)

    @property
    def s_bar(self):
        """Mean twisted scalar curvature; Ric omega = 0 on the model curve."""
        return -self.mass

    @property
    def chi_density(self):
        return self.beta_density + self.grid.d2(self.f_values)

    @property
    def positivity_flag(self):
        return bool(self.chi_density.min() >= -psi_tol(self.grid.n_points))

    @property
    def strict_flag(self):
        return bool(self.chi_density.min() >= self.eps_chi)

    @property
    def is_trivial(self):
        return not np.any(self.beta_density) and not np.any(self.f_values)

    @cached_property
    def total_potential(self):
        """F = f + B with D2 B = b - m, so that chi = m + D2 F."""
        b = self.beta_density
        return self.f_values + self.grid.solve_poisson(b - b.mean())

    @cached_property
    def total_spline(self):
        return periodic_spline(self.grid, self.total_potential)

    @cached_property
    def f_spline(self):
        return periodic_spline(self.grid, self.f_values)


def _density(u):
    rho = 1.0 + u.grid.d2(u.values)
    return np.maximum(rho, 0.0)


def _dual_parts(g):
    """phi, r = D2 g, midpoints p_{i+1/2} and forward slopes D+ phi."""
    grid = g.grid
    phi = g.periodic_part
    r = 1.0 + grid.d2(phi)
    mid = grid.nodes + 0.5 * grid.spacing
    s = grid.dplus(phi)
    return phi, r, mid, s


def _neg_log(r):
    if np.any(r <= 0):
        return np.inf
    return -float(np.sum(np.log(r)))


def am(u):
    """Aubin-Mabuchi energy; AM(u + c) = AM(u) + c."""
    if isinstance(u, SymplecticPotential):
        return -u.grid.integrate(u.periodic_part)
    rho = 1.0 + u.grid.d2(u.values)
    return 0.5 * (u.grid.integrate(u.values) + u.grid.integrate(u.values * rho))


def _mean_u(g):
    phi, _, _, s = _dual_parts(g)
    return -g.grid.integrate(phi) + 0.5 * g.grid.integrate(s**2)


def am_gamma(u, gamma_density):
    """AM_gamma(u) = int u gamma dx."""
    gamma = np.asarray(gamma_density, dtype=float)
    if isinstance(u, SymplecticPotential):
        # split gamma = mean + D2 C and integrate the second part by parts
        grid = u.grid
        mean = float(gamma.mean())
        c = periodic_spline(grid, grid.solve_poisson(gamma - mean))
        _, _, mid, s = _dual_parts(u)
        h = grid.spacing
        return mean * _mean_u(u) + h * float(np.sum(c(mid + s))) - h * float(
            np.sum(c(grid.nodes))
        )
    return u.grid.integrate(u.values * gamma)


def am_chi(u, chi):
    """AM_chi(u) = AM_beta(u) + int f (dmu_u - dx)."""
    if isinstance(u, SymplecticPotential):
        grid = u.grid
        _, _, mid, s = _dual_parts(u)
        F = chi.total_spline
        h = grid.spacing
        return (
            chi.mass * _mean_u(u)
            + h * float(np.sum(F(mid + s)))
            - h * float(np.sum(chi.total_potential))
        )
    rho = 1.0 + u.grid.d2(u.values)
    return am_gamma(u, chi.beta_density) + u.grid.integrate(chi.f_values * (rho - 1.0))


def entropy(f_ref, u):
    """Ent(e^{-f} dx, mu_u) = int log(rho e^f) rho dx; +inf when not subordinate."""
    f_ref = np.asarray(f_ref, dtype=float)
    grid = u.grid
    if isinstance(u, SymplecticPotential):
        _, r, mid, s = _dual_parts(u)
        if np.any(r <= 0):
            return np.inf
        if np.all(f_ref == 0):
            return grid.spacing * _neg_log(r)
        f = periodic_spline(grid, f_ref)
        return grid.spacing * (_neg_log(r) + float(np.sum(f(mid + s))))
    rho = _density(u)
    charged = rho > 0
    if np.any(np.isposinf(f_ref[charged])):
        return np.inf
    integrand = np.zeros_like(rho)
    integrand[charged] = rho[charged] * (
        np.log(np.maximum(rho[charged], RHO_FLOOR)) + f_ref[charged]
    )
    return grid.integrate(integrand)


def kenergy(u):
    """K-energy Ent(dx, mu_u) + S_bar AM(u) - AM_Ric(u) on the flat curve."""
    grid = u.grid
    s_bar = 0.0
    ricci = np.zeros(grid.n_points)
    value = entropy(np.zeros(grid.n_points), u)
    if s_bar:
        value += s_bar * am(u)
    if np.any(ricci):
        value -= am_gamma(u, ricci)
    return value


def twisted_kenergy(u, chi):
    """Ent(e^{-f} dx, mu_u) + S_bar_chi AM(u) + AM_beta(u) - int f dx."""
    if chi.is_trivial:
        return kenergy(u)
    if isinstance(u, SymplecticPotential):
        value, _ = dual_kenergy(u.periodic_part, u.grid, chi)
        return value
    return (
        entropy(chi.f_values, u)
        + chi.s_bar * am(u)
        + am_gamma(u, chi.beta_density)
        - u.grid.integrate(chi.f_values)
    )


def twisted_kenergy_alt(u, chi):
    """The same energy as Ent(dx, mu_u) + S_bar_chi AM(u) + AM_chi(u)."""
    return entropy(np.zeros(u.grid.n_points), u) + chi.s_bar * am(u) + am_chi(u, chi)


def kenergy_gradient(u, chi):
    """First variation density S_bar_chi - S_u + tr_u chi on the grid.

    This is the exact gradient of the discrete twisted K-energy with respect
    to the pairing h * sum(grad * du * rho).
    """
    if isinstance(u, SymplecticPotential):
        raise TypeError("kenergy_gradient expects a KahlerPotential")
    grid = u.grid
    rho = 1.0 + grid.d2(u.values)
    if rho.min() < RHO_MIN:
        node = int(rho.argmin())
        raise DegenerateMetric(f"density {rho.min():.3e} < {RHO_MIN} at node {node}")
    scalar = -grid.d2(np.log(rho)) / rho
    return chi.s_bar - scalar + chi.chi_density / rho


def dual_kenergy(phi, grid, chi, derivatives=False):
    """Twisted K-energy of g = p^2/2 + phi in moment coordinates.

    J(phi) = -h sum log(1 + D2 phi) + m/2 h sum (D+ phi)^2
             + h sum F(p_{i+1/2} + D+ phi) - h sum F(x_i)

    With ``derivatives`` also returns the L2 gradient and the two diagonal
    weights of the Hessian D2' diag(1/r^2) D2 + D+' diag(m + F'') D+.
    """
    h = grid.spacing
    r = 1.0 + grid.d2(phi)
    if np.any(r <= 0):
        return (np.inf, None) if not derivatives else (np.inf, None, None, None)
    s = grid.dplus(phi)
    m = chi.mass
    value = -h * float(np.sum(np.log(r))) + 0.5 * m * h * float(np.sum(s**2))
    if chi.is_trivial:
        if not derivatives:
            return value, None
        flux = np.zeros_like(s)
        curv = np.zeros_like(s)
    else:
        mid = grid.nodes + 0.5 * h
        F = chi.total_spline
        value += h * float(np.sum(F(mid + s))) - h * float(np.sum(chi.total_potential))
        if not derivatives:
            return value, None
        flux = m * s + F(mid + s, 1)
        curv = m + F(mid + s, 2)
    inv = 1.0 / r
    grad = -grid.d2(inv) - (flux - np.roll(flux, 1)) / h
    return value, grad, inv**2, curv
