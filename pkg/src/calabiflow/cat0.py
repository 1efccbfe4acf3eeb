"""CAT(0) comparison, asymptotic centers and weak d_2 convergence.

In the symplectic representation d_2 is the flat L^2(dp) distance, so the
asymptotic center of a finite tail is the center of its minimum enclosing
ball, found from the dual quadratic program over simplex weights.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionViolated, Unbounded
from .geodesic import geodesic
from .geometry import SymplecticPotential, as_symplectic, inverse_legendre
from .metric import dp

WEAK_TOL = 1e-3


@dataclass(frozen=True)
class PotentialSequence:
    items: tuple
    tag: str = ""
    _duals: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("a potential sequence must be nonempty")
        grid = items[0].grid
        if any(v.grid != grid for v in items):
            raise ValueError("all items must share a grid")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "_duals", tuple(as_symplectic(v) for v in items))

    def __len__(self):
        return len(self.items)

    @property
    def grid(self):
        return self.items[0].grid

    def dual_matrix(self, indices=None):
        duals = self._duals if indices is None else [self._duals[i] for i in indices]
        return np.vstack([g.values for g in duals])

    def subsequence(self, start, stride=1, tag=None):
        picked = self.items[start::stride]
        return PotentialSequence(picked, tag or f"{self.tag}[{start}::{stride}]")


def cat0_comparison_check(p, q, r, lam):
    """d(p, s)^2 - [lam d(p, r)^2 + (1 - lam) d(p, q)^2 - lam (1 - lam) d(q, r)^2].

    Here s is the point at parameter lam on the geodesic from q to r.
    """
    s = geodesic(q, r).sample(lam)
    d_ps = dp(p, s, 2)
    return d_ps**2 - (
        lam * dp(p, r, 2) ** 2 + (1 - lam) * dp(p, q, 2) ** 2 - lam * (1 - lam) * dp(q, r, 2) ** 2
    )


def _enclosing_ball(points, weight, start=0, max_iter=20000):
    """Center and radius of the smallest ball containing the rows of ``points``.

    Maximizes sum_i l_i K_ii - l'Kl over the simplex by Frank-Wolfe with away
    steps, then solves the KKT system on the support exactly.
    """
    mean = points.mean(axis=0)
    P = points - mean
    K = weight * (P @ P.T)
    diag = np.diag(K).copy()
    m = len(points)
    lam = np.zeros(m)
    lam[start % m] = 1.0
    scale = max(diag.max(), 1e-300)
    for _ in range(max_iter):
        grad = diag - 2 * K @ lam
        fw = int(np.argmax(grad))
        support = np.flatnonzero(lam > 0)
        away = support[np.argmin(grad[support])]
        value = grad @ lam
        gap_fw = grad[fw] - value
        gap_away = value - grad[away]
        if max(gap_fw, gap_away) <= 1e-15 * scale:
            break
        if gap_fw >= gap_away:
            direction = -lam.copy()
            direction[fw] += 1.0
            step_max = 1.0
        else:
            direction = lam.copy()
            direction[away] -= 1.0
            step_max = lam[away] / (1.0 - lam[away]) if lam[away] < 1 else 1e12
        slope = grad @ direction
        curv = 2 * direction @ K @ direction
        step = step_max if curv <= 0 else min(step_max, slope / curv)
        lam = np.maximum(lam + step * direction, 0.0)
        lam /= lam.sum()
    lam = _polish(K, diag, lam)
    center = lam @ P + mean
    radius = np.sqrt(max(float(np.max(weight * np.sum((points - center) ** 2, axis=1))), 0.0))
    return center, radius, lam


def _polish(K, diag, lam):
    support = np.flatnonzero(lam > 1e-10)
    k = len(support)
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = 2 * K[np.ix_(support, support)]
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    rhs = np.append(diag[support], 1.0)
    try:
        sol = np.linalg.lstsq(system, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:
        return lam
    if np.any(sol[:k] < 0):
        return lam
    polished = np.zeros_like(lam)
    polished[support] = sol[:k]
    grad = diag - 2 * K @ polished
    if np.max(grad) > sol[k] + 1e-12 * max(diag.max(), 1e-300):
        return lam
    return polished


def _tail_indices(n, tail_window):
    if tail_window is None:
        tail_window = max(1, n - n // 2)
    tail_window = int(min(max(tail_window, 1), n))
    return list(range(n - tail_window, n))


def _check_bounded(seq, bound):
    first = seq.dual_matrix([0])[0]
    h = seq.grid.spacing
    radii = np.sqrt(h * np.sum((seq.dual_matrix() - first) ** 2, axis=1))
    if not np.all(np.isfinite(radii)) or radii.max() > bound:
        raise Unbounded(f"d_2 distance from the first item reaches {radii.max():.3e} > {bound}")


def asymptotic_center_dual(seq, tail_window=None, start=0, bound=1e3):
    """Symplectic asymptotic center, radius and the tail indices used."""
    _check_bounded(seq, bound)
    idx = _tail_indices(len(seq), tail_window)
    center, radius, _ = _enclosing_ball(seq.dual_matrix(idx), seq.grid.spacing, start=start)
    return SymplecticPotential(seq.grid, center), radius, idx


def asymptotic_center(seq, tail_window=None, start=0, bound=1e3):
    """Minimizer of max over the tail window of d_2(x, x_n), and that radius.

    The tail window (default: last half) stands in for the limsup over an
    infinite sequence.  ``start`` picks the initial vertex of the optimizer.
    """
    center, radius, _ = asymptotic_center_dual(seq, tail_window, start=start, bound=bound)
    return inverse_legendre(center), radius


def subsequences(seq, n_subseq):
    """Deterministic strided, tail-shifted subsequences."""
    out = []
    for j in range(n_subseq):
        stride = 1 + j // 2
        offset = j % 2
        out.append(seq.subsequence(offset, stride))
    return out


def weak_d2_limit_check(seq, candidate, n_subseq=4, weak_tol=WEAK_TOL, tail_window=None):
    """Whether the asymptotic centers of sampled subsequences all lie near ``candidate``."""
    target = as_symplectic(candidate)
    for sub in subsequences(seq, n_subseq):
        window = None if tail_window is None else max(1, tail_window * len(sub) // len(seq))
        center, _, _ = asymptotic_center_dual(sub, window)
        if dp(center, target, 2) > weak_tol:
            return False
    return True


def d1_ball_convexity_check(center, rho, v0, v1, t_samples):
    """Whether the geodesic from v0 to v1 stays in the closed d_1 ball."""
    h = center.grid.spacing
    for label, v in (("v0", v0), ("v1", v1)):
        dist = dp(v, center, 1)
        if dist > rho:
            raise PreconditionViolated(f"{label} lies outside the ball: d_1 = {dist:.6g} > {rho}")
    seg = geodesic(v0, v1)
    return all(dp(seg.symplectic(t), center, 1) <= rho + 10 * h for t in t_samples)


@dataclass
class Thm53Report:
    d1_converges: bool
    l1_converges: bool
    weak_converges: bool
    d1_tail: float
    l1_tail: float
    tail_window: int

    @property
    def biconditional_holds(self):
        return self.d1_converges == (self.l1_converges and self.weak_converges)


def thm53_check(seq, u, tol=WEAK_TOL, tail_window=None, n_subseq=4):
    """Evaluate d_1 convergence, L^1 convergence and weak d_2 convergence to ``u``.

    Convergence on finite data means the largest value over the tail window
    (default: last quarter) is at most ``tol``.
    """
    n = len(seq)
    if tail_window is None:
        tail_window = max(1, n // 4)
    tail = seq.items[n - tail_window:]
    ref = u.values
    d1 = max(dp(v, u, 1) for v in tail)
    l1 = max(seq.grid.integrate(np.abs(v.values - ref)) for v in tail)
    weak = weak_d2_limit_check(seq, u, n_subseq=n_subseq, weak_tol=tol)
    return Thm53Report(d1 <= tol, l1 <= tol, weak, d1, l1, tail_window)
