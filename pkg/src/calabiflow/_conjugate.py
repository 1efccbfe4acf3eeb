"""Discrete convex conjugation on uniform grids.

The conjugate of the piecewise-linear interpolant of (x_i, w_i) is known
exactly at the chord slopes of the lower hull.  Those values are shifted by
the local quadratic gap (curvature * edge_length**2 / 8) and interpolated by
cubic splines, split wherever the conjugate has a kink (long hull edge) or is
affine over a gap (hull vertex with an isolated slope jump).  For smooth input
this gives values accurate to O(h**3) whose second differences converge, which
a plain max-over-nodes transform does not.
"""

import numpy as np
from scipy.interpolate import CubicSpline

# ratio of a vertex's slope jump to its neighbours' above which the vertex is a kink
_KINK_RATIO = 3.0
_LONG_EDGE = 1.5
_FLAT = 1e-7
# adjacent chord-slope spacings differing by more than this factor split a spline
_SPACING_RATIO = 2.0


def lower_hull(x, y, tol=None):
    """Indices of the lower convex hull of points sorted by ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if tol is None:
        tol = 1e-11 * (1.0 + np.max(np.abs(y)))
    slopes = np.diff(y) / np.diff(x)
    if np.all(np.diff(slopes) > tol):
        return np.arange(x.size)
    hull = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            s_ab = (y[b] - y[a]) / (x[b] - x[a])
            s_bi = (y[i] - y[b]) / (x[i] - x[b])
            if s_bi - s_ab <= tol:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull)


def hull_values(x, y, tol=None):
    """The lower convex envelope of (x, y) evaluated back at ``x``."""
    idx = lower_hull(x, y, tol)
    return np.interp(x, x[idx], y[idx])


def _curvature(s, ell, single, kink):
    # w'' per edge from slope jumps to single-cell neighbours
    n = s.size
    mid_gap = 0.5 * (ell[:-1] + ell[1:])
    jump = np.diff(s) / mid_gap
    usable = single[:-1] & single[1:] & ~kink
    left = np.full(n, np.nan)
    right = np.full(n, np.nan)
    left[1:] = np.where(usable, jump, np.nan)
    right[:-1] = np.where(usable, jump, np.nan)
    both = np.vstack([left, right])
    count = np.sum(~np.isnan(both), axis=0)
    total = np.nansum(both, axis=0)
    return np.where(count > 0, total / np.maximum(count, 1), 0.0)


def conjugate(x, y, targets):
    """Evaluate sup_i (t * x_i - y_i) smoothly at each target slope ``t``.

    ``x`` must be uniformly spaced and increasing; the hull slopes must cover
    the target range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    targets = np.asarray(targets, dtype=float)
    h = x[1] - x[0]
    # vertices with w'' below _FLAT are treated as collinear
    tol = max(1e-11 * (1.0 + np.max(np.abs(y))), _FLAT * h)
    idx = lower_hull(x, y, tol)
    xv, yv = x[idx], y[idx]
    ell = np.diff(xv)
    s = np.diff(yv) / ell
    c = s * xv[:-1] - yv[:-1]
    single = ell < _LONG_EDGE * h

    # kink vertices of w: slope jumps well above those two and three vertices away
    # (a kink falling between nodes is split over adjacent vertices)
    jumps = np.diff(s)
    m = jumps.size
    kink = np.zeros(m, dtype=bool)
    in_cluster = np.zeros(m, dtype=bool)
    drop = np.zeros(s.size, dtype=bool)
    if m:
        padded = np.concatenate([np.zeros(3), jumps, np.zeros(3)])
        neighbour = np.max(
            np.vstack([padded[3 + off:3 + off + m] for off in (-3, -2, 2, 3)]), axis=0
        )
        eligible = (jumps > 1e-3 * h) & single[:-1] & single[1:]
        elevated = eligible & (jumps > 1.5 * neighbour)
        strong = eligible & (jumps > _KINK_RATIO * neighbour)
        k = 0
        while k < m:
            if not elevated[k]:
                k += 1
                continue
            end_run = k
            while end_run + 1 < m and elevated[end_run + 1]:
                end_run += 1
            if np.any(strong[k:end_run + 1]):
                kink[end_run] = True
                in_cluster[k:end_run + 1] = True
                # chords straddling the kink carry O(h) errors; bridge over them
                drop[k + 1:end_run + 1] = True
            k = end_run + 1

    curv = _curvature(s, ell, single, in_cluster)
    c = c + np.where(single, ell**2 * curv / 8.0, 0.0)

    keep = ~drop
    gap_after = np.zeros(s.size, dtype=bool)
    gap_after[:-1] = kink
    s, c, single = s[keep], c[keep], single[keep]
    # a gap after a dropped run is recorded on the last kept point before it
    gap_after = np.logical_or.reduceat(gap_after, np.flatnonzero(keep)) if keep.any() else gap_after

    # a long edge is a kink of the conjugate: it ends one segment and starts the next;
    # a kink vertex of w makes the conjugate affine between two points (a gap)
    # a point where the slope spacing changes abruptly ends one spline and starts the next
    n_pts = s.size
    ds = np.diff(s)
    abrupt = np.zeros(n_pts, dtype=bool)
    if n_pts > 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = ds[1:] / ds[:-1]
        abrupt[1:-1] = ~((ratio < _SPACING_RATIO) & (ratio > 1.0 / _SPACING_RATIO))
    bounds = []
    a = 0
    for k in range(1, n_pts):
        if not single[k - 1]:
            bounds.append((a, k - 1))
            a = k - 1
        elif gap_after[k - 1]:
            bounds.append((a, k - 1))
            a = k
        if abrupt[k] and k > a:
            bounds.append((a, k))
            a = k
    bounds.append((a, n_pts - 1))

    out = np.interp(targets, s, c)
    pos = np.searchsorted(s, targets, side="right") - 1
    pos = np.clip(pos, 0, n_pts - 2)
    for a, b in bounds:
        # abrupt end points carry unreliable corrections; join them linearly
        while a < b and abrupt[a]:
            a += 1
        while b > a and abrupt[b]:
            b -= 1
        if b - a < 2:
            continue
        sel = (pos >= a) & (pos < b)
        if not np.any(sel):
            continue
        spline = CubicSpline(s[a:b + 1], c[a:b + 1])
        out[sel] = spline(targets[sel])
    return out
