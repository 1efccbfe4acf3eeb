"""Finsler norms, the d_p distances, the I functional and two-sided energy bounds."""

import numpy as np

from .energy import am
from .geometry import KahlerPotential, as_kahler, as_symplectic, envelope, ma_measure


def finsler_norm(xi, u, p):
    """(int |xi|^p dmu_u)^{1/p}."""
    if p < 1:
        raise ValueError("p must be >= 1")
    rho = ma_measure(as_kahler(u)).density
    xi = np.asarray(xi, dtype=float)
    return u.grid.integrate(np.abs(xi) ** p * rho) ** (1.0 / p)


def _constant_offset(a, b):
    if isinstance(a, KahlerPotential) and isinstance(b, KahlerPotential):
        diff = b.values - a.values
        if np.ptp(diff) == 0.0:
            return float(diff[0])
    return None


def dp(u0, u1, p=2):
    """d_p distance computed as the flat L^p distance of the Legendre duals.

    Accepts Kahler or symplectic potentials.  Pairs that differ by a constant
    return that constant exactly.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if u0.grid != u1.grid:
        raise ValueError("potentials live on different grids")
    c = _constant_offset(u0, u1)
    if c is not None:
        return abs(c)
    diff = as_symplectic(u0).values - as_symplectic(u1).values
    return u0.grid.integrate(np.abs(diff) ** p) ** (1.0 / p)


def d1_envelope(u0, u1):
    """d_1 = AM(u0) + AM(u1) - 2 AM(P(u0, u1)), computed on the Kahler side."""
    u0, u1 = as_kahler(u0), as_kahler(u1)
    value = am(u0) + am(u1) - 2.0 * am(envelope([u0, u1]))
    return max(value, 0.0)


def i_functional(u, v):
    """I(u, v) = int (u - v)(dmu_v - dmu_u)."""
    u, v = as_kahler(u), as_kahler(v)
    mu_u = ma_measure(u).density
    mu_v = ma_measure(v).density
    return u.grid.integrate((u.values - v.values) * (mu_v - mu_u))


def dp_ratio_check(u0, u1, p=2):
    """Ratio of the two-sided Kahler-side surrogate to d_p, and its inverse.

    The surrogate is ||u0 - u1||_{L^p(mu_u0)} + ||u0 - u1||_{L^p(mu_u1)}.
    Returns (ratio, 1/ratio); both are 1 when numerator and distance vanish.
    """
    u0, u1 = as_kahler(u0), as_kahler(u1)
    diff = u0.values - u1.values
    num = finsler_norm(diff, u0, p) + finsler_norm(diff, u1, p)
    den = dp(u0, u1, p)
    if den == 0.0 and num == 0.0:
        return 1.0, 1.0
    if den == 0.0:
        return np.inf, 0.0
    ratio = num / den
    return ratio, 1.0 / ratio if ratio > 0 else np.inf
