"""CSV formats, analytic input specs and flat config files."""

import csv
from pathlib import Path

import numpy as np

from .energy import TwistData
from .geometry import DensityMeasure, KahlerPotential, PeriodicGrid, cos_potential, envelope


class InputError(ValueError):
    """Malformed spec string, file or config entry."""


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv_columns(path, expected):
    """Read a headed CSV and return its columns as float arrays."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        if header != list(expected):
            raise InputError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    if not rows or any(len(r) != len(expected) for r in rows):
        raise InputError(f"{path}: every row needs {len(expected)} values")
    data = np.array(rows)
    return [data[:, j] for j in range(len(expected))]


def _check_nodes(x, grid, path):
    if len(x) != grid.n_points:
        raise InputError(f"{path}: {len(x)} rows but the grid has {grid.n_points} points")
    if np.max(np.abs(x - grid.nodes)) > 1e-9:
        raise InputError(f"{path}: x must be the uniform nodes i/n in ascending order")


def _split(spec):
    name, _, arg = spec.partition(":")
    return name.strip(), arg.strip()


def _number(arg, spec):
    try:
        return float(arg)
    except ValueError:
        raise InputError(f"bad number in spec {spec!r}") from None


def parse_potential(spec, grid):
    """'zero', 'const:c', 'cos:a', 'kinked:a' (envelope of 0 and cos:a) or a CSV path x,u."""
    name, arg = _split(spec)
    if name == "zero" and not arg:
        return KahlerPotential.constant(grid)
    if name == "const":
        return KahlerPotential.constant(grid, _number(arg, spec))
    if name == "cos":
        return cos_potential(grid, _number(arg, spec))
    if name == "kinked":
        return envelope([KahlerPotential.constant(grid), cos_potential(grid, _number(arg, spec))])
    if spec.endswith(".csv") or Path(spec).suffix:
        x, u = read_csv_columns(spec, ("x", "u"))
        _check_nodes(x, grid, spec)
        return KahlerPotential(grid, u)
    raise InputError(f"unknown potential spec {spec!r}")


def parse_twist(spec, grid):
    """'none', 'uniform:m' or a CSV path x,b,f."""
    name, arg = _split(spec)
    if name == "none" and not arg:
        return TwistData.none(grid)
    if name == "uniform":
        m = _number(arg, spec)
        if m < 0:
            raise InputError("uniform twist mass must be nonnegative")
        return TwistData.uniform(grid, m)
    if spec.endswith(".csv") or Path(spec).suffix:
        x, b, f = read_csv_columns(spec, ("x", "b", "f"))
        _check_nodes(x, grid, spec)
        try:
            return TwistData(grid, b, f)
        except ValueError as exc:
            raise InputError(f"{spec}: {exc}") from None
    raise InputError(f"unknown twist spec {spec!r}")


def parse_density(spec, grid):
    """'uniform', 'cosdensity:a' (1 - a cos 2 pi x) or a CSV path x,rho."""
    name, arg = _split(spec)
    if name == "uniform" and not arg:
        return DensityMeasure(grid, np.ones(grid.n_points))
    if name == "cosdensity":
        a = _number(arg, spec)
        if abs(a) > 1:
            raise InputError("cosdensity needs |a| <= 1")
        return DensityMeasure(grid, 1.0 - a * np.cos(2 * np.pi * grid.nodes))
    if spec.endswith(".csv") or Path(spec).suffix:
        x, rho = read_csv_columns(spec, ("x", "rho"))
        _check_nodes(x, grid, spec)
        try:
            return DensityMeasure(grid, rho)
        except ValueError as exc:
            raise InputError(f"{spec}: {exc}") from None
    raise InputError(f"unknown density spec {spec!r}")


def write_potential(path, u):
    write_csv(path, ("x", "u"), zip(u.grid.nodes, u.values))


def write_twist(path, chi):
    write_csv(path, ("x", "b", "f"), zip(chi.grid.nodes, chi.beta_density, chi.f_values))


def write_density(path, mu):
    write_csv(path, ("x", "rho"), zip(mu.grid.nodes, mu.density))


def read_config(path):
    """Flat 'key = value' file; blank lines and '#' comments are ignored."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such config file: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def make_grid(n):
    n = int(n)
    if n < 64 or n & (n - 1):
        raise InputError(f"grid size must be a power of two >= 64, got {n}")
    return PeriodicGrid(n)
