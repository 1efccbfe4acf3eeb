"""Finite energy geodesics as straight lines of symplectic potentials."""

from dataclasses import dataclass

import numpy as np

from . import energy
from .exceptions import PreconditionViolated
from .geometry import SymplecticPotential, as_symplectic, inverse_legendre
from .metric import finsler_norm


@dataclass(frozen=True)
class GeodesicSegment:
    g0: SymplecticPotential
    g1: SymplecticPotential

    def __post_init__(self):
        if self.g0.grid != self.g1.grid:
            raise ValueError("endpoints live on different grids")

    @property
    def grid(self):
        return self.g0.grid

    def symplectic(self, t):
        t = float(t)
        return SymplecticPotential(self.grid, (1.0 - t) * self.g0.values + t * self.g1.values)

    def sample(self, t):
        return inverse_legendre(self.symplectic(t))

    def speed(self, t, p=2, delta=None):
        """Finsler norm of the forward difference quotient of u_t at time t."""
        if delta is None:
            delta = 4.0 / self.grid.n_points
        t0 = min(float(t), 1.0 - delta)
        u = self.sample(t0)
        du = (self.sample(t0 + delta).values - u.values) / delta
        return finsler_norm(du, u, p)


def geodesic(u0, u1):
    """Legendre-linear segment joining two potentials of either representation."""
    return GeodesicSegment(as_symplectic(u0), as_symplectic(u1))


def hcma_residual(seg, n_t=None):
    """max |(1 + Phi_xx) Phi_tt - Phi_tx^2| over an n_t x n_points space-time grid."""
    n = seg.grid.n_points
    if n_t is None:
        n_t = n // 4
    if n_t < 8:
        raise ValueError("n_t must be at least 8")
    h = seg.grid.spacing
    dt = 1.0 / n_t
    phi = np.vstack([seg.sample(k * dt).values for k in range(n_t + 1)])
    mid = phi[1:-1]
    phi_xx = (np.roll(mid, 1, axis=1) - 2 * mid + np.roll(mid, -1, axis=1)) / h**2
    phi_tt = (phi[2:] - 2 * mid + phi[:-2]) / dt**2
    # centred mixed difference
    dxp = np.roll(phi, -1, axis=1) - np.roll(phi, 1, axis=1)
    phi_tx = (dxp[2:] - dxp[:-2]) / (4 * h * dt)
    r = (1.0 + phi_xx) * phi_tt - phi_tx**2
    return float(np.max(np.abs(r)))


def maximum_principle_check(seg_a, seg_b, t_samples):
    """Whether u^A_t <= u^B_t + 10 h at all sampled t, given ordered endpoints."""
    h = seg_a.grid.spacing
    tol = 10 * h
    for t, label in ((0.0, "start"), (1.0, "end")):
        gap = seg_a.sample(t).values - seg_b.sample(t).values
        if gap.max() > tol:
            node = int(gap.argmax())
            raise PreconditionViolated(f"{label} points not ordered at node {node}", node=node)
    for t in t_samples:
        if np.max(seg_a.sample(t).values - seg_b.sample(t).values) > tol:
            return False
    return True


def am_slope_identity(seg, t, delta=None):
    """One-sided slopes int du_t/dt dmu_{u_t} at t, and AM(u_1) - AM(u_0)."""
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    if delta is None:
        delta = 4.0 / seg.grid.n_points
    delta = min(delta, t, 1.0 - t)
    u = seg.sample(t)
    rho = 1.0 + seg.grid.d2(u.values)
    left = seg.grid.integrate((u.values - seg.sample(t - delta).values) / delta * rho)
    right = seg.grid.integrate((seg.sample(t + delta).values - u.values) / delta * rho)
    end = energy.am(seg.g1) - energy.am(seg.g0)
    return left, right, end


FUNCTIONALS = ("kenergy", "twisted_kenergy", "entropy", "am_chi", "am")


def _functional(functional_id, chi=None, f_ref=None):
    if functional_id == "kenergy":
        return energy.kenergy
    if functional_id == "twisted_kenergy":
        return lambda v: energy.twisted_kenergy(v, chi)
    if functional_id == "entropy":
        return lambda v: energy.entropy(f_ref, v)
    if functional_id == "am_chi":
        return lambda v: energy.am_chi(v, chi)
    if functional_id == "am":
        return energy.am
    raise ValueError(f"unknown functional {functional_id!r}; expected one of {FUNCTIONALS}")


def convexity_check(functional_id, seg, t_samples, chi=None, f_ref=None, delta=None):
    """Largest midpoint violation F(u_t) - (F(u_{t-d}) + F(u_{t+d}))/2.

    For ``am`` the absolute deviation from linearity is returned instead.
    Energies are evaluated on the symplectic path, where they are exact.
    """
    if functional_id in ("twisted_kenergy", "am_chi") and chi is None:
        raise ValueError(f"{functional_id} needs a twist")
    if functional_id == "entropy" and f_ref is None:
        f_ref = np.zeros(seg.grid.n_points)
    F = _functional(functional_id, chi, f_ref)
    if delta is None:
        delta = 4.0 / seg.grid.n_points
    worst = -np.inf
    for t in t_samples:
        d = min(delta, t, 1.0 - t)
        if d <= 0:
            continue
        mid = F(seg.symplectic(t))
        avg = 0.5 * (F(seg.symplectic(t - d)) + F(seg.symplectic(t + d)))
        gap = abs(mid - avg) if functional_id == "am" else mid - avg
        worst = max(worst, gap)
    return float(worst)

