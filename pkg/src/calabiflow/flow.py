"""The weak (twisted) Calabi flow as a proximal minimizing movement.

Each step minimizes v -> d_2(v, c)^2 / 2 + tau K_chi(v).  In moment
coordinates d_2 is the flat L^2 distance between periodic parts phi of the
symplectic potentials and K_chi is the convex functional ``dual_kenergy``, so
a step is a strictly convex problem in phi solved by damped Newton.  The
-log(1 + D2 phi) term is an interior barrier keeping g convex.

The L^2 gradient flow of that functional is phi_t = D2(1 / g'') - ..., i.e.
g_t = (1 / g'')'' in the untwisted case; ``smooth_flow_reference`` integrates
it explicitly.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .energy import RHO_MIN, TwistData, dual_kenergy, entropy
from .exceptions import (
    Blowup,
    DegenerateMetric,
    Inconclusive,
    NoConvergence,
    NotDiverging,
    PreconditionViolated,
)
from .geometry import SymplecticPotential, as_symplectic, inverse_legendre
from .metric import dp

AM_TOL = 1e-6
PROX_TOL = 1e-10
EVI_TOL = 1e-4
LIMIT_TOL = 1e-3


@dataclass(frozen=True)
class FlowConfig:
    tau: float = 1e-2
    n_steps: int = 200
    twist: TwistData = None
    prox_tol: float = PROX_TOL
    evi_tol: float = EVI_TOL
    halving_checks: int = 0
    halving_constant: float = 1.0
    max_newton: int = 100

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValueError("n_steps must be a nonnegative integer")
        if not (self.prox_tol > 0 and self.evi_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.halving_checks < 0:
            raise ValueError("halving_checks must be nonnegative")

    def twist_for(self, grid):
        return TwistData.none(grid) if self.twist is None else self.twist


@dataclass(frozen=True)
class Trajectory:
    """Recorded iterates of a flow; symplectic potentials are the primary data."""

    times: np.ndarray
    symplectic: tuple = field(repr=False)
    energies: np.ndarray = field(repr=False)
    am_values: np.ndarray = field(repr=False)
    step_distances: np.ndarray = field(repr=False)
    twist: TwistData = field(repr=False)
    tau: float = 0.0
    projected: bool = False
    halving_drifts: tuple = ()
    halving_ok: bool = True

    @classmethod
    def from_potentials(cls, potentials, tau, twist=None, times=None):
        """Build a trajectory from given potentials (used for synthetic curves)."""
        gs = tuple(as_symplectic(v) for v in potentials)
        grid = gs[0].grid
        twist = TwistData.none(grid) if twist is None else twist
        if times is None:
            times = tau * np.arange(len(gs))
        phis = [g.periodic_part for g in gs]
        return cls(
            times=np.asarray(times, dtype=float),
            symplectic=gs,
            energies=np.array([dual_kenergy(phi, grid, twist)[0] for phi in phis]),
            am_values=np.array([-grid.integrate(phi) for phi in phis]),
            step_distances=np.array(
                [np.sqrt(grid.integrate((b - a) ** 2)) for a, b in zip(phis, phis[1:])]
            ),
            twist=twist,
            tau=float(tau),
        )

    def __len__(self):
        return len(self.symplectic)

    @property
    def grid(self):
        return self.symplectic[0].grid

    @cached_property
    def potentials(self):
        return tuple(inverse_legendre(g) for g in self.symplectic)

    @cached_property
    def distances_from_start(self):
        phi0 = self.symplectic[0].periodic_part
        return np.array(
            [np.sqrt(self.grid.integrate((g.periodic_part - phi0) ** 2)) for g in self.symplectic]
        )

    def entropies(self):
        f = self.twist.f_values
        return np.array([entropy(f, g) for g in self.symplectic])


def _difference_operators(grid):
    n = grid.n_points
    h = grid.spacing
    eye = sparse.identity(n, format="csr")
    shift = sparse.csr_matrix((np.ones(n), (np.arange(n), (np.arange(n) + 1) % n)), shape=(n, n))
    dplus = (shift - eye) / h
    d2 = (shift + shift.T - 2 * eye) / h**2
    return eye, dplus.tocsr(), d2.tocsr()


def _prox_objective(phi, phi_c, tau, grid, chi):
    value, _ = dual_kenergy(phi, grid, chi)
    return 0.5 * grid.integrate((phi - phi_c) ** 2) + tau * value


def _feasible_start(phi_c, grid, chi):
    if np.isfinite(dual_kenergy(phi_c, grid, chi)[0]):
        return phi_c.copy()
    # blend toward the flat potential with the same mean; 1 + D2 phi > 0 afterwards
    for theta in (1e-6, 1e-4, 1e-2, 0.1, 0.5):
        trial = (1 - theta) * phi_c + theta * phi_c.mean()
        if np.isfinite(dual_kenergy(trial, grid, chi)[0]):
            return trial
    return np.full_like(phi_c, phi_c.mean())


def prox_periodic(phi_c, tau, grid, chi, tol=PROX_TOL, max_iter=100):
    """Minimize h sum (phi - phi_c)^2 / 2 + tau J(phi) over periodic grid functions.

    Optimality is measured by the Newton decrement sqrt(grad' H^-1 grad), the
    gradient norm in the metric of the Hessian.  Since the objective is
    1-strongly convex it also bounds the L^2 distance to the exact minimizer,
    whereas the plain gradient norm has a roundoff floor growing like h^-4.
    """
    eye, dplus, d2 = _difference_operators(grid)
    phi = _feasible_start(np.asarray(phi_c, dtype=float), grid, chi)
    value = _prox_objective(phi, phi_c, tau, grid, chi)
    decrement = np.inf
    for _ in range(max_iter):
        _, grad_j, w, curv = dual_kenergy(phi, grid, chi, derivatives=True)
        grad = (phi - phi_c) + tau * grad_j
        hess = eye + tau * (d2.T @ sparse.diags(w) @ d2 + dplus.T @ sparse.diags(curv) @ dplus)
        step = -spsolve(hess.tocsc(), grad)
        # constants lie in the kernel of the tau term, so the exact step has
        # mean -mean(grad); restoring it stops roundoff leaking into AM at large tau
        step += -grad.mean() - step.mean()
        slope = grid.integrate(grad * step)
        decrement = np.sqrt(max(-slope, 0.0))
        if decrement <= tol:
            return phi
        # below this the Armijo test is lost in the roundoff of the objective
        unresolved = -slope <= 1e-12 * (1.0 + abs(value))
        t = 1.0
        while t > 1e-14:
            trial = phi + t * step
            new_value = _prox_objective(trial, phi_c, tau, grid, chi)
            if np.isfinite(new_value) and (unresolved or new_value <= value + 1e-4 * t * slope):
                break
            t *= 0.5
        else:
            break
        phi, value = trial, new_value
        if t == 1.0 and decrement < 1e-3 * tol**0.5:
            # quadratic convergence: the next decrement is far below tol
            return phi
    raise NoConvergence(f"proximal Newton decrement {decrement:.3e} > {tol:.3e}", residual=decrement)


def proximal_step(c, tau, chi=None, tol=PROX_TOL, max_iter=100):
    """Minimizer of v -> d_2(v, c)^2 / 2 + tau K_chi(v).

    Accepts and returns the same representation as ``c``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = as_symplectic(c)
    grid = g.grid
    chi = TwistData.none(grid) if chi is None else chi
    phi = prox_periodic(g.periodic_part, tau, grid, chi, tol=tol, max_iter=max_iter)
    out = SymplecticPotential.from_periodic(grid, phi)
    return out if isinstance(c, SymplecticPotential) else inverse_legendre(out)


def _iterate(phi0, tau, n_steps, grid, chi, config):
    phis = [phi0]
    phi = phi0
    for _ in range(n_steps):
        phi = prox_periodic(phi, tau, grid, chi, tol=config.prox_tol, max_iter=config.max_newton)
        phis.append(phi)
    return phis


def _d2(a, b, grid):
    return float(np.sqrt(grid.integrate((a - b) ** 2)))


def run_flow(c0, config):
    """Iterate proximal steps of size tau from c0 and record diagnostics.

    A start with infinite K_chi is first moved into its domain by one proximal
    step of size tau / 1000.  With ``halving_checks = k`` the run is repeated
    with tau / 2, ..., tau / 2^k and the largest d_2 drift at matched times is
    compared with halving_constant * tau.
    """
    g0 = as_symplectic(c0)
    grid = g0.grid
    chi = config.twist_for(grid)
    phi0 = g0.periodic_part
    projected = False
    if not np.isfinite(dual_kenergy(phi0, grid, chi)[0]):
        phi0 = prox_periodic(phi0, config.tau * 1e-3, grid, chi, tol=config.prox_tol)
        projected = True
    phis = _iterate(phi0, config.tau, config.n_steps, grid, chi, config)

    drifts = []
    for k in range(1, config.halving_checks + 1):
        factor = 2**k
        fine = _iterate(phi0, config.tau / factor, config.n_steps * factor, grid, chi, config)
        drift = max(_d2(phis[j], fine[j * factor], grid) for j in range(len(phis)))
        drifts.append((config.tau / factor, drift))
    ok = all(d <= config.halving_constant * config.tau for _, d in drifts)

    return Trajectory(
        times=config.tau * np.arange(len(phis)),
        symplectic=tuple(SymplecticPotential.from_periodic(grid, p) for p in phis),
        energies=np.array([dual_kenergy(p, grid, chi)[0] for p in phis]),
        am_values=np.array([-grid.integrate(p) for p in phis]),
        step_distances=np.array([_d2(a, b, grid) for a, b in zip(phis, phis[1:])]),
        twist=chi,
        tau=config.tau,
        projected=projected,
        halving_drifts=tuple(drifts),
        halving_ok=ok,
    )


def evi_check(traj, v, evi_tol=EVI_TOL):
    """Largest violation of the discrete evolution variational inequality.

    At every step, (d_2(c_{k+1}, v)^2 - d_2(c_k, v)^2) / (2 tau) is compared
    with K_chi(v) - K_chi(c_{k+1}); the returned value is the largest excess,
    which should be at most ``evi_tol``.
    """
    grid = traj.grid
    phi_v = as_symplectic(v).periodic_part
    k_v, _ = dual_kenergy(phi_v, grid, traj.twist)
    if not np.isfinite(k_v):
        raise PreconditionViolated("K_chi(v) is infinite")
    dist2 = np.array([grid.integrate((g.periodic_part - phi_v) ** 2) for g in traj.symplectic])
    if len(traj) < 2:
        return 0.0
    lhs = 0.5 * np.diff(dist2) / traj.tau
    rhs = k_v - traj.energies[1:]
    return float(np.max(lhs - rhs))


def contractivity_check(traj_a, traj_b):
    """max_k d_2(a_k, b_k) - d_2(a_0, b_0) over matched steps."""
    if len(traj_a) != len(traj_b) or traj_a.tau != traj_b.tau:
        raise ValueError("trajectories must share tau and length")
    grid = traj_a.grid
    d = np.array(
        [_d2(a.periodic_part, b.periodic_part, grid) for a, b in zip(traj_a.symplectic, traj_b.symplectic)]
    )
    return float(np.max(d - d[0]))


@dataclass
class Converged:
    limit: SymplecticPotential = field(repr=False)
    d1_gap: float
    d2_gap: float
    gradient_norm: float
    entropy_final: float
    entropy_limit: float
    entropy_converging: bool

    @property
    def label(self):
        return "Converged"


@dataclass
class Diverging:
    distance_growth: np.ndarray = field(repr=False)
    threshold: float = 0.0
    final_distance: float = 0.0

    @property
    def label(self):
        return "Diverging"


def detect_limit(g, chi, tau=1e4, n_steps=20, tol=1e-12):
    """Approximate the minimizer reached from g by large proximal steps.

    Proximal steps conserve the mean of phi, so for the untwisted energy this
    is exactly the constant with the same AM.
    """
    grid = g.grid
    phi = g.periodic_part
    for _ in range(n_steps):
        nxt = prox_periodic(phi, tau, grid, chi, tol=PROX_TOL)
        moved = _d2(nxt, phi, grid)
        phi = nxt
        if moved <= tol:
            break
    return SymplecticPotential.from_periodic(grid, phi)


def dichotomy_classify(traj, step_tol=1e-6, stab_tol=1e-4, growth_factor=10.0):
    """Classify a trajectory as Converged or Diverging.

    Converged: the last step distance is at most ``step_tol`` and d_2(c_0, c_t)
    varies by at most ``stab_tol`` over the last quarter.  Diverging:
    d_2(c_0, c_t) ends above ``growth_factor`` times the first step distance
    and increases strictly over the last quarter.  Otherwise Inconclusive.
    """
    grid = traj.grid
    dist = traj.distances_from_start
    steps = traj.step_distances
    quarter = max(1, len(traj) // 4)
    tail = dist[-quarter - 1:] if len(dist) > quarter else dist
    if len(steps) == 0 or (steps[-1] <= step_tol and np.ptp(tail) <= stab_tol):
        final = traj.symplectic[-1]
        limit = detect_limit(final, traj.twist)
        f = traj.twist.f_values
        ent = traj.entropies()
        ent_limit = entropy(f, limit)
        gaps = np.abs(ent - ent_limit)
        tail_gaps = gaps[-quarter:]
        _, grad_j, _, _ = dual_kenergy(final.periodic_part, grid, traj.twist, derivatives=True)
        return Converged(
            limit=limit,
            d1_gap=dp(final, limit, 1),
            d2_gap=dp(final, limit, 2),
            gradient_norm=float(np.sqrt(grid.integrate(grad_j**2))),
            entropy_final=float(ent[-1]),
            entropy_limit=float(ent_limit),
            entropy_converging=bool(
                gaps[-1] <= max(LIMIT_TOL, 1e-3 * gaps[0])
                and np.all(np.diff(tail_gaps) <= 1e-12 + 1e-9 * gaps[0])
            ),
        )
    threshold = growth_factor * steps[0]
    if dist[-1] >= threshold and np.all(np.diff(tail) > 0):
        return Diverging(distance_growth=dist.copy(), threshold=threshold, final_distance=float(dist[-1]))
    raise Inconclusive(
        f"last step {steps[-1]:.3e}, tail spread {np.ptp(tail):.3e}, "
        f"distance {dist[-1]:.3e} vs threshold {threshold:.3e}"
    )


@dataclass
class RayReport:
    ells: np.ndarray
    times: np.ndarray
    samples: list = field(repr=False)
    cauchy_gaps: np.ndarray = field(repr=False)
    stable: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    energy_nonincreasing: bool = True


def asymptotic_ray(traj, ell_max, n_times=8, cauchy_tol=None, override=False):
    """Sample unit speed geodesics from c_0 toward c_{t_j} for geometric t_j.

    For each arclength ell in [0, ell_max] the samples along j are checked for
    d_1 Cauchy behaviour: ``stable[i]`` means the last two samples agree within
    ``cauchy_tol`` (default 10 h).  ``samples[i]`` is the last sample where
    stable and None otherwise.  ``energies`` is K_chi along the last ray.
    """
    if not override:
        try:
            label = dichotomy_classify(traj)
        except Inconclusive as exc:
            raise NotDiverging(f"trajectory is not diverging: {exc}") from exc
        if not isinstance(label, Diverging):
            raise NotDiverging("trajectory converges")
    grid = traj.grid
    h = grid.spacing
    if cauchy_tol is None:
        cauchy_tol = 10 * h
    dist = traj.distances_from_start
    eligible = np.flatnonzero(dist >= ell_max)
    if len(eligible) < 2:
        raise NotDiverging(f"fewer than two iterates reach distance {ell_max}")
    picks = np.unique(np.round(np.geomspace(eligible[0], eligible[-1], n_times)).astype(int))
    picks = [int(k) for k in picks if dist[k] >= ell_max]
    phi0 = traj.symplectic[0].periodic_part
    ells = np.linspace(0.0, ell_max, 9)

    rows = []
    for k in picks:
        direction = (traj.symplectic[k].periodic_part - phi0) / dist[k]
        rows.append([SymplecticPotential.from_periodic(grid, phi0 + ell * direction) for ell in ells])

    gaps = np.zeros((max(len(rows) - 1, 0), len(ells)))
    for j in range(1, len(rows)):
        for i in range(len(ells)):
            gaps[j - 1, i] = dp(rows[j][i], rows[j - 1][i], 1)
    stable = gaps[-1] <= cauchy_tol if len(gaps) else np.ones(len(ells), dtype=bool)
    samples = [rows[-1][i] if stable[i] else None for i in range(len(ells))]
    energies = np.array([dual_kenergy(g.periodic_part, grid, traj.twist)[0] for g in rows[-1]])
    return RayReport(
        ells=ells,
        times=traj.times[picks],
        samples=samples,
        cauchy_gaps=gaps,
        stable=np.asarray(stable),
        energies=energies,
        energy_nonincreasing=bool(np.all(np.diff(energies) <= 1e-10 * (1 + np.abs(energies[:-1])))),
    )


def smooth_flow_reference(c0, tau_e, n, chi=None, record_every=1):
    """Explicit Euler for phi_t = -grad J, the smooth flow in moment coordinates.

    Untwisted this is g_t = (1 / g'')''.  Explicit Euler is stable only for
    tau_e below about h^4 min(g'')^2 / 8, so it is meant for coarse grids.
    Records every ``record_every``-th of the ``n`` steps.
    """
    g = as_symplectic(c0)
    grid = g.grid
    chi = TwistData.none(grid) if chi is None else chi
    phi = g.periodic_part.copy()
    r = 1.0 + grid.d2(phi)
    if r.min() <= 0 or (1.0 / r).min() < RHO_MIN:
        raise DegenerateMetric(f"start density below {RHO_MIN}")
    phis = [phi.copy()]
    h2 = grid.spacing**2
    for k in range(1, n + 1):
        if chi.is_trivial:
            inv = 1.0 / r
            phi = phi + tau_e * (np.roll(inv, 1) - 2 * inv + np.roll(inv, -1)) / h2
        else:
            _, grad, _, _ = dual_kenergy(phi, grid, chi, derivatives=True)
            phi = phi - tau_e * grad
        r = 1.0 + (np.roll(phi, 1) - 2 * phi + np.roll(phi, -1)) / h2
        if k % record_every == 0:
            if not np.all(np.isfinite(phi)) or r.min() <= 0 or (1.0 / r).min() < RHO_MIN:
                raise Blowup(f"density floor violated by step {k}")
            phis.append(phi.copy())
    if not np.all(np.isfinite(phi)) or r.min() <= 0 or (1.0 / r).min() < RHO_MIN:
        raise Blowup("density floor violated at the final step")
    step = tau_e * record_every
    return Trajectory(
        times=step * np.arange(len(phis)),
        symplectic=tuple(SymplecticPotential.from_periodic(grid, p) for p in phis),
        energies=np.array([dual_kenergy(p, grid, chi)[0] for p in phis]),
        am_values=np.array([-grid.integrate(p) for p in phis]),
        step_distances=np.array([_d2(a, b, grid) for a, b in zip(phis, phis[1:])]),
        twist=chi,
        tau=step,
    )


def trajectory_distance(traj_a, traj_b):
    """sup over common recorded times of d_2 between two trajectories."""
    grid = traj_a.grid
    out = 0.0
    for t, g in zip(traj_a.times, traj_a.symplectic):
        j = int(np.argmin(np.abs(traj_b.times - t)))
        if abs(traj_b.times[j] - t) > 1e-9 * max(1.0, t):
            continue
        out = max(out, _d2(g.periodic_part, traj_b.symplectic[j].periodic_part, grid))
    return out


def minimizer_uniqueness_check(chi, starts, config=None, tol=LIMIT_TOL):
    """Whether flows from equal-AM starts reach the same limit within ``tol`` in max norm."""
    if not chi.strict_flag:
        raise PreconditionViolated("the twist must be strictly positive")
    gs = [as_symplectic(s) for s in starts]
    ams = [-g.grid.integrate(g.periodic_part) for g in gs]
    if max(ams) - min(ams) > AM_TOL:
        raise PreconditionViolated(f"starts have different AM values (spread {max(ams) - min(ams):.3e})")
    if config is None:
        config = FlowConfig(tau=1e-2, n_steps=200, twist=chi)
    elif config.twist is not chi:
        config = FlowConfig(**{**config.__dict__, "twist": chi})
    limits = []
    for g in gs:
        traj = run_flow(g, config)
        label = dichotomy_classify(traj)
        if not isinstance(label, Converged):
            raise Inconclusive("a run did not converge")
        limits.append(inverse_legendre(label.limit).values)
    return all(np.max(np.abs(lim - limits[0])) <= tol for lim in limits[1:])
