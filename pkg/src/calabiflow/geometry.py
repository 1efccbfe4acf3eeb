"""Periodic grids, potentials, Legendre duality, Monge-Ampere measures, envelopes.

The model manifold is the flat elliptic curve of unit volume.  An invariant
Kahler potential is a periodic function ``u`` on [0, 1) with ``1 + u'' >= 0``;
its Monge-Ampere measure is ``(1 + u'') dx``.  The convex function
``w(x) = x**2 / 2 + u(x)`` has Legendre dual ``g(p) = p**2 / 2 + phi(p)`` with
``phi`` periodic, and finite energy geodesics are straight lines in ``g``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._conjugate import conjugate, hull_values
from .exceptions import ConvexityViolation, PshViolation

MASS_TOL = 1e-9


def psi_tol(n_points):
    """Tolerance on the discrete positivity condition; scales like 1/h**2."""
    return 1e-9 * n_points**2


def roundtrip_tol(n_points):
    return 20.0 / n_points**2


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid x_i = i / n on the unit circle."""

    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError(f"n_points must be an integer >= 8, got {self.n_points}")

    @property
    def spacing(self):
        return 1.0 / self.n_points

    @property
    def nodes(self):
        return np.arange(self.n_points) / self.n_points

    def extended_nodes(self):
        """Nodes over three fundamental domains, [-1, 2)."""
        n = self.n_points
        return np.arange(-n, 2 * n) / n

    def d2(self, values):
        """Centered periodic second difference."""
        v = np.asarray(values, dtype=float)
        return (np.roll(v, 1) - 2.0 * v + np.roll(v, -1)) / self.spacing**2

    def dplus(self, values):
        """Forward periodic difference (value at the cell midpoints)."""
        v = np.asarray(values, dtype=float)
        return (np.roll(v, -1) - v) / self.spacing

    def integrate(self, values):
        """Trapezoidal rule on the circle (the plain Riemann sum)."""
        return float(np.sum(values) * self.spacing)

    def spectral_d2(self, values):
        """Spectral second derivative; accurate only for smooth periodic data."""
        v = np.asarray(values, dtype=float)
        k = np.fft.rfftfreq(self.n_points, d=self.spacing)
        return np.fft.irfft(-(2 * np.pi * k) ** 2 * np.fft.rfft(v), n=self.n_points)

    def heat(self, values, s):
        """Discrete heat semigroup exp(s * D2) applied to ``values``."""
        v = np.asarray(values, dtype=float)
        k = np.arange(self.n_points // 2 + 1)
        lam = (2.0 * np.cos(2 * np.pi * k / self.n_points) - 2.0) / self.spacing**2
        return np.fft.irfft(np.exp(s * lam) * np.fft.rfft(v), n=self.n_points)

    def solve_poisson(self, rhs):
        """Zero-mean periodic solution of D2 v = rhs (rhs must have zero mean)."""
        r = np.asarray(rhs, dtype=float)
        k = np.arange(self.n_points // 2 + 1)
        lam = (2.0 * np.cos(2 * np.pi * k / self.n_points) - 2.0) / self.spacing**2
        lam[0] = 1.0
        coef = np.fft.rfft(r) / lam
        coef[0] = 0.0
        return np.fft.irfft(coef, n=self.n_points)


@dataclass(frozen=True)
class KahlerPotential:
    """Samples of an invariant potential ``u`` on a periodic grid."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite")
        rho = 1.0 + self.grid.d2(self.values)
        worst = float(rho.min())
        if worst < -psi_tol(self.grid.n_points):
            node = int(rho.argmin())
            raise PshViolation(
                f"1 + D2u = {worst:.3e} at node {node} (x = {node * self.grid.spacing:.6f})"
            )

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.nodes))

    @classmethod
    def constant(cls, grid, c=0.0):
        return cls(grid, np.full(grid.n_points, float(c)))

    def __add__(self, c):
        if isinstance(c, KahlerPotential):
            return NotImplemented
        return KahlerPotential(self.grid, self.values + float(c))

    __radd__ = __add__

    def __sub__(self, c):
        return self + (-float(c))

    @property
    def convex_values(self):
        """w = x**2 / 2 + u on the grid."""
        return self.grid.nodes**2 / 2 + self.values

    def extended_convex(self):
        """w over the tripled domain, using w(x + 1) = w(x) + x + 1/2."""
        x = self.grid.extended_nodes()
        return x, x**2 / 2 + np.tile(self.values, 3)


@dataclass(frozen=True)
class SymplecticPotential:
    """Samples of the Legendre dual ``g`` on the moment interval [0, 1).

    Stored as ``g``; the periodic part ``phi = g - p**2 / 2`` is what the flow
    and the metrics work with.
    """

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("symplectic potential values must be finite")
        curv = 1.0 + self.grid.d2(self.periodic_part)
        worst = float(curv.min())
        if worst < -psi_tol(self.grid.n_points):
            node = int(curv.argmin())
            raise ConvexityViolation(f"D2 g = {worst:.3e} at node {node}")

    @classmethod
    def from_periodic(cls, grid, phi):
        return cls(grid, grid.nodes**2 / 2 + np.asarray(phi, dtype=float))

    @property
    def periodic_part(self):
        return self.values - self.grid.nodes**2 / 2

    @property
    def curvature(self):
        """D2 g, the reciprocal of the Monge-Ampere density in moment coordinates."""
        return 1.0 + self.grid.d2(self.periodic_part)

    def extended(self):
        """g over the tripled domain, using g(p + 1) = g(p) + p + 1/2."""
        p = self.grid.extended_nodes()
        return p, p**2 / 2 + np.tile(self.periodic_part, 3)


@dataclass(frozen=True)
class DensityMeasure:
    """A probability density on the circle grid."""

    grid: PeriodicGrid
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "density", _frozen(self.density))
        if self.density.shape != (self.grid.n_points,):
            raise ValueError("density has the wrong shape")
        if np.any(self.density < 0) or not np.all(np.isfinite(self.density)):
            raise ValueError("density must be finite and nonnegative")

    @property
    def mass(self):
        return self.grid.integrate(self.density)


def ma_measure(u):
    """Monge-Ampere measure (1 + D2 u) dx of a potential."""
    rho = 1.0 + u.grid.d2(u.values)
    if rho.min() < -psi_tol(u.grid.n_points):
        raise PshViolation(f"1 + D2u = {rho.min():.3e}")
    if rho.min() < 0:
        rho = np.maximum(rho, 0.0)
        rho = rho / u.grid.integrate(rho)
    return DensityMeasure(u.grid, rho)


def legendre(u):
    """Legendre dual of w = x**2/2 + u, sampled on the moment grid."""
    x, w = u.extended_convex()
    g = conjugate(x, w, u.grid.nodes)
    return SymplecticPotential(u.grid, g)


def inverse_legendre(g):
    """Kahler potential u(x) = sup_p (x p - g(p)) - x**2/2."""
    if not isinstance(g, SymplecticPotential):
        raise TypeError("inverse_legendre expects a SymplecticPotential")
    p, gext = g.extended()
    x = g.grid.nodes
    w = conjugate(p, gext, x)
    return KahlerPotential(g.grid, w - x**2 / 2)


def as_symplectic(v):
    """Return the symplectic representation of a potential of either kind."""
    if isinstance(v, SymplecticPotential):
        return v
    if isinstance(v, KahlerPotential):
        return legendre(v)
    raise TypeError(f"expected a potential, got {type(v).__name__}")


def as_kahler(v):
    if isinstance(v, KahlerPotential):
        return v
    if isinstance(v, SymplecticPotential):
        return inverse_legendre(v)
    raise TypeError(f"expected a potential, got {type(v).__name__}")


def envelope(us):
    """Rooftop envelope: the largest discrete psh function below min_i u_i."""
    us = list(us)
    if not us:
        raise ValueError("envelope needs at least one potential")
    grid = us[0].grid
    if any(v.grid != grid for v in us):
        raise ValueError("all potentials must share a grid")
    x = grid.extended_nodes()
    lowest = np.min(np.vstack([v.extended_convex()[1] for v in us]), axis=0)
    hull = hull_values(x, lowest)
    n = grid.n_points
    return KahlerPotential(grid, hull[n:2 * n] - grid.nodes**2 / 2)


def approximate_decreasing(u, k_max, s0=0.05):
    """Decreasing sequence of heat-smoothed potentials converging to ``u``.

    u_k = exp(s_k D2) u + s_k with s_k = s0 * 2**(-k/2).  Because D2 u >= -1
    and the discrete heat semigroup is positivity preserving, d/ds of
    exp(s D2) u + s is >= 0, so the sequence decreases in k and stays above u.
    """
    out = []
    for k in range(1, k_max + 1):
        s = s0 * 2.0 ** (-k / 2)
        out.append(KahlerPotential(u.grid, u.grid.heat(u.values, s) + s))
    return out


def cos_potential(grid, a):
    """u_a(x) = a / (4 pi^2) cos(2 pi x), with density 1 - a cos(2 pi x)."""
    return KahlerPotential(grid, a / (4 * np.pi**2) * np.cos(2 * np.pi * grid.nodes))


def random_potential(grid, rng, n_modes=4, strength=0.6, shift=0.0):
    """Random smooth potential with density >= 1 - strength."""
    x = grid.nodes
    coef = rng.normal(size=(n_modes, 2))
    coef *= strength / np.sum(np.abs(coef))
    u = np.full(grid.n_points, float(shift))
    for k in range(1, n_modes + 1):
        scale = 1.0 / (2 * np.pi * k) ** 2
        u += scale * (coef[k - 1, 0] * np.cos(2 * np.pi * k * x) + coef[k - 1, 1] * np.sin(2 * np.pi * k * x))
    return KahlerPotential(grid, u)


def cos_symplectic(grid, a):
    """Legendre dual of u_a computed by inverting p = x - a sin(2 pi x) / (2 pi).

    Accurate to roundoff for |a| < 1; used as a noise-free reference.
    """
    if not abs(a) < 1:
        raise ValueError("need |a| < 1 for a smooth dual")
    p = grid.nodes
    x = p.copy()
    for _ in range(100):
        resid = x - a * np.sin(2 * np.pi * x) / (2 * np.pi) - p
        x -= resid / (1 - a * np.cos(2 * np.pi * x))
        if np.max(np.abs(resid)) < 1e-16:
            break
    w = x**2 / 2 + a / (4 * np.pi**2) * np.cos(2 * np.pi * x)
    return SymplecticPotential(grid, p * x - w)
