"""Batch driver: ``calabiflow {dist,geodesic,flow,solve-ma,approx}``.

Every flag may also be given in a flat ``key = value`` file passed with
``--config``; flags on the command line win.  Exit codes: 0 success,
1 property violation, 2 usage or input error.
"""

import argparse
import sys

import numpy as np

from . import energy
from .exceptions import CalabiFlowError, Inconclusive, MassMismatch, PshViolation
from .flow import (
    AM_TOL,
    EVI_TOL,
    PROX_TOL,
    Converged,
    FlowConfig,
    contractivity_check,
    dichotomy_classify,
    evi_check,
    run_flow,
)
from .geodesic import FUNCTIONALS, convexity_check, geodesic, hcma_residual
from .geometry import PeriodicGrid, random_potential
from .io import (
    InputError,
    fmt,
    make_grid,
    parse_density,
    parse_potential,
    parse_twist,
    read_config,
    write_csv,
    write_potential,
)
from .masolver import (
    SOLVER_TOL,
    approximate_with_entropy,
    eps_limit_study,
    eps_residual,
    solve_ma,
    solve_ma_eps,
)
from .metric import d1_envelope, dp, dp_ratio_check

OK, VIOLATION, USAGE = 0, 1, 2
RATIO_BOUND = 10.0
CONVEXITY_TOL = 1e-8
AM_LINEARITY_TOL = 1e-10


class Violation(Exception):
    pass


def _emit(args, suffix, header, rows):
    if args.out:
        write_csv(f"{args.out}_{suffix}.csv", header, rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(fmt(v) for v in row))


def cmd_dist(args):
    grid = make_grid(args.grid)
    a = parse_potential(args.a, grid)
    b = parse_potential(args.b, grid)
    d = dp(a, b, args.p)
    ratio, inverse = dp_ratio_check(a, b, args.p)
    print(repr(float(d)))
    row = [args.p, d, ratio, inverse]
    header = ["p", "dp", "ratio", "inverse_ratio"]
    if args.p == 1:
        header.append("d1_envelope")
        row.append(d1_envelope(a, b))
    if args.out:
        write_csv(f"{args.out}_dist.csv", header, [row])
    else:
        for key, value in zip(header[2:], row[2:]):
            print(f"{key}={fmt(value)}")
    if not (1 / RATIO_BOUND <= ratio <= RATIO_BOUND):
        raise Violation(f"two-sided ratio {ratio:.4g} outside [{1 / RATIO_BOUND}, {RATIO_BOUND}]")
    return OK


def cmd_geodesic(args):
    grid = make_grid(args.grid)
    seg = geodesic(parse_potential(args.a, grid), parse_potential(args.b, grid))
    ts = np.linspace(0.0, 1.0, args.samples)
    samples, summary = [], []
    for t in ts:
        u = seg.sample(t)
        g = seg.symplectic(t)
        samples.extend((t, x, v) for x, v in zip(grid.nodes, u.values))
        summary.append((t, energy.am(g), energy.kenergy(g), energy.entropy(np.zeros(grid.n_points), g), seg.speed(t)))
    _emit(args, "samples", ("t", "x", "u"), samples)
    _emit(args, "summary", ("t", "AM", "K", "Ent", "speed"), summary)

    # refinement table only makes sense for analytic endpoints
    residuals = []
    if not any(s.endswith(".csv") for s in (args.a, args.b)):
        for n in (grid.n_points // 4, grid.n_points // 2, grid.n_points):
            if n < 32:
                continue
            coarse = PeriodicGrid(n)
            s = geodesic(parse_potential(args.a, coarse), parse_potential(args.b, coarse))
            res = hcma_residual(s)
            ratio = res / residuals[-1][1] if residuals and residuals[-1][1] > 0 else float("nan")
            residuals.append((n, res, ratio))
        _emit(args, "residual", ("n", "residual", "ratio"), residuals)

    t_inner = np.linspace(0.1, 0.9, 9)
    battery = []
    for name in FUNCTIONALS:
        chi = energy.TwistData.uniform(grid, 1.0) if name in ("twisted_kenergy", "am_chi") else None
        battery.append((name, convexity_check(name, seg, t_inner, chi=chi)))
    _emit(args, "convexity", ("functional", "max_violation"), battery)
    for name, value in battery:
        limit = AM_LINEARITY_TOL if name == "am" else CONVEXITY_TOL
        if value > limit:
            raise Violation(f"{name} convexity violation {value:.3e} > {limit}")
    return OK


def _converged_step(steps, tol):
    above = np.flatnonzero(steps > tol)
    return 0 if len(above) == 0 else int(above[-1]) + 1


def cmd_flow(args):
    grid = make_grid(args.grid)
    chi = parse_twist(args.twist, grid)
    c0 = parse_potential(args.start, grid)
    config = FlowConfig(tau=args.tau, n_steps=args.steps, twist=chi, prox_tol=args.prox_tol)
    traj = run_flow(c0, config)
    dist = traj.distances_from_start
    ents = traj.entropies()
    steps = np.append(0.0, traj.step_distances)
    _emit(
        args,
        "traj",
        ("t", "AM", "K", "Ent", "d2_from_start", "step_d2"),
        zip(traj.times, traj.am_values, traj.energies, ents, dist, steps),
    )
    final = traj.potentials[-1]
    if args.out:
        write_potential(f"{args.out}_final.csv", final)

    rng = np.random.default_rng(args.seed)
    evi = max(evi_check(traj, random_potential(grid, rng, strength=0.9)) for _ in range(args.evi_points))
    partner = run_flow(random_potential(grid, rng, strength=0.9), config)
    growth = contractivity_check(traj, partner)
    try:
        label = dichotomy_classify(traj)
        classification = label.label
    except Inconclusive:
        label, classification = None, "Inconclusive"
    diag = [
        ("evi_max", evi),
        ("contractivity_growth", growth),
        ("am_drift", float(np.ptp(traj.am_values))),
        ("max_energy_increase", float(np.max(np.diff(traj.energies), initial=0.0))),
        ("classification", classification),
        ("converged_step", _converged_step(traj.step_distances, 1e-6)),
    ]
    if isinstance(label, Converged):
        diag += [("d1_gap", label.d1_gap), ("entropy_final", label.entropy_final)]
    _emit(args, "diag", ("key", "value"), diag)

    checks = [
        (np.ptp(traj.am_values) <= AM_TOL, "AM drift"),
        (np.max(np.diff(traj.energies), initial=0.0) <= args.prox_tol, "energy increase"),
        (evi <= EVI_TOL, "EVI violation"),
        (growth <= 10 * args.prox_tol, "contractivity"),
    ]
    for ok, what in checks:
        if not ok:
            raise Violation(f"{what} out of tolerance")
    return OK


def cmd_solve_ma(args):
    grid = make_grid(args.grid)
    mu = parse_density(args.density, grid)
    u = solve_ma(mu)
    if args.out:
        write_potential(f"{args.out}_potential.csv", u)
    else:
        _emit(args, "potential", ("x", "u"), zip(grid.nodes, u.values))
    if args.eps:
        try:
            eps_list = [float(e) for e in args.eps.split(",")]
        except ValueError:
            raise InputError(f"bad eps list {args.eps!r}") from None
        rows = eps_limit_study(mu, eps_list)
        table = []
        for row in rows:
            phi = solve_ma_eps(mu, row.eps)
            res = float(np.max(np.abs(eps_residual(phi.values, mu.density, row.eps, grid))))
            table.append(
                (row.eps, row.distances[1], row.distances[2], row.normalized_distances[1], row.normalized_distances[2], res)
            )
        _emit(args, "eps", ("eps", "d1", "d2", "d1_normalized", "d2_normalized", "residual"), table)
        if any(r[-1] > SOLVER_TOL for r in table):
            raise Violation("eps-equation residual above tolerance")
        d1 = [r[1] for r in table]
        if any(b > a for a, b in zip(d1, d1[1:])):
            raise Violation("eps-limit table is not monotone")
    return OK


def cmd_approx(args):
    grid = make_grid(args.grid)
    u = parse_potential(args.start, grid)
    f_ref = args.fref * np.cos(2 * np.pi * grid.nodes)
    steps = approximate_with_entropy(u, f_ref=f_ref)
    _emit(
        args,
        "stages",
        ("stage", "parameter", "d1", "d2", "entropy_gap"),
        [(s.stage, s.parameter, s.d1, s.d2, s.entropy_gap) for s in steps],
    )
    if args.out:
        write_potential(f"{args.out}_final.csv", steps[-1].potential)
    last = steps[-1]
    if max(last.d1, last.d2, last.entropy_gap) > args.gap_tol:
        raise Violation(f"final gaps exceed {args.gap_tol}")
    return OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--grid", type=int, default=1024, help="grid size, a power of two >= 64")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output prefix; stdout when omitted")

    parser = argparse.ArgumentParser(prog="calabiflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", parents=[common], help="d_p distance and two-sided ratios")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("geodesic", parents=[common], help="geodesic samples and diagnostics")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--samples", type=int, default=11)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("flow", parents=[common], help="proximal Calabi flow")
    p.add_argument("--tau", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--twist", default="none")
    p.add_argument("--start", default="cos:0.5")
    p.add_argument("--prox-tol", type=float, default=PROX_TOL)
    p.add_argument("--evi-points", type=int, default=10)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("solve-ma", parents=[common], help="Monge-Ampere and eps-equation solves")
    p.add_argument("--density", required=True)
    p.add_argument("--eps", default="", help="comma separated decreasing eps values")
    p.set_defaults(func=cmd_solve_ma)

    p = sub.add_parser("approx", parents=[common], help="approximation with converging entropy")
    p.add_argument("--start", default="kinked:0.5")
    p.add_argument("--fref", type=float, default=0.0, help="amplitude A of f = A cos(2 pi x)")
    p.add_argument("--gap-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_approx)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    command = next((a for a in argv if not a.startswith("-")), None)
    for action in parser._subparsers._group_actions:
        for name, sp in action.choices.items():
            if name != command:
                continue
            dests = {a.dest for a in sp._actions}
            unknown = set(values) - dests
            if unknown:
                raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
            # string defaults are converted by argparse with the action's type
            sp.set_defaults(**values)
            for a in sp._actions:
                if a.dest in values:
                    a.required = False


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    except (InputError, MassMismatch, PshViolation, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except Violation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return VIOLATION
    except CalabiFlowError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return VIOLATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
