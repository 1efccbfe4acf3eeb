"""Monge-Ampere solvers on the circle and the approximation-with-entropy pipeline.

In dimension one the equation (1 + u'') dx = mu is linear and is solved by a
periodic double antiderivative.  The regularized equation
1 + phi'' = exp(eps phi) rho is the Euler-Lagrange equation of the strictly
concave functional

    E(phi) = int -phi'^2/2 + phi - exp(eps phi) rho / eps,

which is maximized by damped Newton iterations.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .energy import entropy
from .exceptions import MassMismatch, NoConvergence, PreconditionViolated
from .geometry import MASS_TOL, DensityMeasure, KahlerPotential, ma_measure
from .metric import dp

SOLVER_TOL = 1e-10


def _check_mass(mu):
    mass = mu.mass
    if abs(mass - 1.0) > MASS_TOL:
        raise MassMismatch(f"total mass {mass:.12g} differs from 1 by more than {MASS_TOL}")


def _density_array(mu):
    return mu.density if isinstance(mu, DensityMeasure) else np.asarray(mu, dtype=float)


def solve_ma(mu):
    """Solve (1 + D2 u) = rho with the normalization int u dmu = 0."""
    _check_mass(mu)
    grid = mu.grid
    rho = mu.density
    u = grid.solve_poisson(rho - rho.mean())
    u -= grid.integrate(u * rho)
    return KahlerPotential(grid, u)


def _laplacian(grid):
    n = grid.n_points
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    lap = sparse.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    lap[0, n - 1] = 1.0
    lap[n - 1, 0] = 1.0
    return lap.tocsc() / grid.spacing**2


def eps_residual(phi, rho, eps, grid):
    return 1.0 + grid.d2(phi) - np.exp(eps * phi) * rho


def solve_eps_equation(grid, rho, eps, phi0=None, tol=SOLVER_TOL, max_iter=200):
    """Solve 1 + D2 phi = exp(eps phi) rho for a nonnegative density of any mass.

    Returns the grid array phi.  Raises NoConvergence with the final max-norm
    residual when Newton stalls.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or not np.any(rho > 0):
        raise ValueError("density must be nonnegative and not identically zero")
    h = grid.spacing
    # for mass M the solution is phi_hat - log(M)/eps with phi_hat solving the
    # unit-mass problem; solving for phi_hat keeps the iterates O(1)
    offset = np.log(grid.integrate(rho)) / eps
    rho = rho / grid.integrate(rho)
    if phi0 is None:
        # double antiderivative of the density, shifted so that
        # int exp(eps phi) rho = 1 as the equation forces
        base = grid.solve_poisson(rho - rho.mean())
        phi = base - np.log(h * np.sum(np.exp(eps * base) * rho)) / eps
    else:
        phi = np.array(phi0, dtype=float) + offset
    lap = _laplacian(grid)

    def objective(v):
        s = grid.dplus(v)
        return h * np.sum(-0.5 * s**2 + v - np.exp(eps * v) * rho / eps)

    res = eps_residual(phi, rho, eps, grid)
    value = objective(phi)
    for _ in range(max_iter):
        if np.max(np.abs(res)) <= tol:
            return phi - offset
        weight = eps * np.exp(eps * phi) * rho
        jac = lap - sparse.diags(weight)
        step = -spsolve(jac.tocsc(), res)
        # Newton decrement gives the expected increase of the concave objective
        slope = h * float(np.dot(res, step))
        t = 1.0
        while True:
            trial = phi + t * step
            new_value = objective(trial)
            if new_value >= value + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        phi, value = trial, new_value
        new_res = eps_residual(phi, rho, eps, grid)
        if t < 1e-12 or (slope < 1e-30 and np.max(np.abs(new_res)) >= np.max(np.abs(res))):
            res = new_res
            break
        res = new_res
    final = float(np.max(np.abs(res)))
    if final <= tol:
        return phi - offset
    raise NoConvergence(f"eps-equation residual {final:.3e} after {max_iter} iterations", residual=final)


def solve_ma_eps(mu, eps, phi0=None, tol=SOLVER_TOL, max_iter=200):
    """Solve 1 + phi'' = exp(eps phi) rho; the constant is fixed by eps."""
    _check_mass(mu)
    phi = solve_eps_equation(mu.grid, mu.density, eps, phi0=phi0, tol=tol, max_iter=max_iter)
    return KahlerPotential(mu.grid, phi)


def comparison_check(phi, psi, mu, eps, tol=1e-8):
    """Check phi >= psi - 10 h for a solution phi and a subsolution psi.

    ``mu`` may be a DensityMeasure or a density array of any mass.
    """
    grid = phi.grid
    rho = _density_array(mu)
    res = eps_residual(phi.values, rho, eps, grid)
    if np.max(np.abs(res)) > tol:
        node = int(np.argmax(np.abs(res)))
        raise PreconditionViolated(f"phi is not a solution (residual {res[node]:.3e})", node=node)
    defect = 1.0 + grid.d2(psi.values) - np.exp(eps * psi.values) * rho
    if defect.min() < -tol:
        node = int(defect.argmin())
        raise PreconditionViolated(f"psi is not a subsolution (defect {defect[node]:.3e})", node=node)
    return bool(np.all(phi.values >= psi.values - 10 * grid.spacing))


@dataclass
class EpsLimitRow:
    eps: float
    distances: dict
    normalized_distances: dict


def eps_limit_study(mu, eps_list, p_values=(1, 2)):
    """d_p(phi_eps, phi_0) along a decreasing eps schedule.

    phi_0 = solve_ma(mu) satisfies int phi_0 dmu = 0.  Distances are reported
    for the eps-equation's own normalization and after shifting phi_eps to the
    same normalization as phi_0.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    phi_0 = solve_ma(mu)
    rows = []
    guess = None
    for eps in eps_list:
        phi = solve_ma_eps(mu, eps, phi0=guess)
        guess = phi.values
        shifted = phi - mu.grid.integrate(phi.values * mu.density)
        rows.append(
            EpsLimitRow(
                eps,
                {p: dp(phi, phi_0, p) for p in p_values},
                {p: dp(shifted, phi_0, p) for p in p_values},
            )
        )
    return rows


def gaussian_smooth(grid, values, width):
    """Periodic convolution with a sampled Gaussian of standard deviation ``width``.

    The kernel is built in real space and normalized, so the result stays
    nonnegative and keeps the integral of ``values``.
    """
    n = grid.n_points
    offsets = np.minimum(np.arange(n), n - np.arange(n)) * grid.spacing
    kernel = np.exp(-0.5 * (offsets / width) ** 2)
    kernel /= kernel.sum()
    out = np.fft.irfft(np.fft.rfft(values) * np.fft.rfft(kernel), n=n)
    return np.maximum(out, 0.0)


@dataclass
class ApproximationStep:
    stage: int
    parameter: float
    potential: KahlerPotential = field(repr=False)
    d1: float
    d2: float
    entropy_gap: float


def approximate_with_entropy(
    u,
    f_ref=None,
    eps_schedule=None,
    levels=(1, 2, 4, 8, 16),
    widths=None,
    stall=1e-6,
):
    """Approximate u by solutions of regularized equations with converging entropy.

    Stage 1 solves the eps-equation for the density of u along eps = 2^-j,
    stopping once the d_2 gap stalls.  Stage 2 truncates the log-density at
    k from above.  Stage 3 smooths the truncated density with Gaussians of
    halving width.  Each stage re-solves the equation with the last eps.
    Gaps are measured against u in d_1, d_2 and Ent(e^{-f} dx, .).
    """
    grid = u.grid
    if f_ref is None:
        f_ref = np.zeros(grid.n_points)
    f_ref = np.asarray(f_ref, dtype=float)
    if eps_schedule is None:
        eps_schedule = [2.0**-j for j in range(1, 15)]
    if widths is None:
        widths = [grid.spacing * 2.0**j for j in range(4, -3, -1)]

    rho = ma_measure(u).density
    shift = grid.integrate(u.values * rho)
    target_entropy = entropy(f_ref, u)
    steps = []

    def record(stage, parameter, phi):
        v = KahlerPotential(grid, phi + shift)
        steps.append(
            ApproximationStep(
                stage,
                parameter,
                v,
                dp(v, u, 1),
                dp(v, u, 2),
                abs(entropy(f_ref, v) - target_entropy),
            )
        )
        return v

    # stage 1: regularized equation with the exact density
    phi = None
    eps = eps_schedule[0]
    for eps in eps_schedule:
        phi = solve_eps_equation(grid, rho, eps, phi0=phi)
        record(1, eps, phi)
        if len(steps) > 1 and abs(steps[-2].d2 - steps[-1].d2) < stall:
            break

    # stage 2: log-density truncated from above
    with np.errstate(divide="ignore"):
        log_rho = np.log(rho)
    truncated = rho
    for k in levels:
        truncated = np.exp(np.minimum(log_rho, k))
        phi = solve_eps_equation(grid, truncated, eps, phi0=phi)
        record(2, k, phi)

    # stage 3: mollified density (log rho may be -inf, the density is bounded)
    for width in widths:
        smooth = gaussian_smooth(grid, truncated, width)
        phi = solve_eps_equation(grid, smooth, eps, phi0=phi)
        record(3, width, phi)
    return steps
