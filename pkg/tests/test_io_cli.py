import csv

import numpy as np
import pytest

from calabiflow.cli import USAGE, VIOLATION, main
from calabiflow.geometry import cos_potential
from calabiflow.io import (
    InputError,
    fmt,
    make_grid,
    parse_density,
    parse_potential,
    parse_twist,
    read_config,
    read_csv_columns,
    write_density,
    write_potential,
    write_twist,
)
from calabiflow.energy import TwistData
from calabiflow.geometry import DensityMeasure
from calabiflow.metric import d1_envelope, dp


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fmt():
    assert fmt(True) == "true"
    assert fmt(np.int64(3)) == "3"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt("Converged") == "Converged"


def test_make_grid():
    assert make_grid("128").n_points == 128
    for bad in (32, 100):
        with pytest.raises(InputError):
            make_grid(bad)


def test_parse_potential_specs(tmp_path):
    grid = make_grid(64)
    assert np.all(parse_potential("zero", grid).values == 0)
    assert np.all(parse_potential("const:2.5", grid).values == 2.5)
    assert np.allclose(parse_potential("cos:0.5", grid).values, cos_potential(grid, 0.5).values)
    assert parse_potential("kinked:0.5", grid).values.min() < 0
    for bad in ("nope", "cos:x", "zero:1"):
        with pytest.raises(InputError):
            parse_potential(bad, grid)


def test_potential_csv_roundtrip(tmp_path):
    grid = make_grid(64)
    u = cos_potential(grid, 0.3)
    path = tmp_path / "u.csv"
    write_potential(path, u)
    assert read_rows(path)[0] == ["x", "u"]
    assert np.array_equal(parse_potential(str(path), grid).values, u.values)
    with pytest.raises(InputError):
        parse_potential(str(path), make_grid(128))
    with pytest.raises(InputError):
        parse_potential(str(tmp_path / "missing.csv"), grid)


def test_csv_header_and_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,v\n0,1\n")
    with pytest.raises(InputError, match="header"):
        read_csv_columns(path, ("x", "u"))
    path.write_text("x,u\n0,abc\n")
    with pytest.raises(InputError):
        read_csv_columns(path, ("x", "u"))
    path.write_text("")
    with pytest.raises(InputError):
        read_csv_columns(path, ("x", "u"))


def test_twist_and_density_specs(tmp_path):
    grid = make_grid(64)
    assert parse_twist("none", grid).is_trivial
    assert parse_twist("uniform:2", grid).mass == pytest.approx(2.0)
    with pytest.raises(InputError):
        parse_twist("uniform:-1", grid)
    chi = TwistData(grid, np.ones(64), 0.01 * np.cos(2 * np.pi * grid.nodes))
    write_twist(tmp_path / "t.csv", chi)
    back = parse_twist(str(tmp_path / "t.csv"), grid)
    assert np.array_equal(back.f_values, chi.f_values)
    assert parse_density("uniform", grid).mass == pytest.approx(1.0)
    assert parse_density("cosdensity:0.5", grid).mass == pytest.approx(1.0)
    with pytest.raises(InputError):
        parse_density("cosdensity:2", grid)
    mu = DensityMeasure(grid, 1 + 0.2 * np.sin(2 * np.pi * grid.nodes))
    write_density(tmp_path / "d.csv", mu)
    assert np.array_equal(parse_density(str(tmp_path / "d.csv"), grid).density, mu.density)


def test_read_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ngrid = 128\nprox-tol = 1e-9  # trailing\n\n")
    assert read_config(path) == {"grid": "128", "prox_tol": "1e-9"}
    path.write_text("grid 128\n")
    with pytest.raises(InputError):
        read_config(path)


def test_dist_constant(capsys):
    assert main(["dist", "--a", "zero", "--b", "const:1", "--p", "2"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "1.0"


def test_dist_matches_envelope_route(capsys):
    assert main(["dist", "--a", "zero", "--b", "cos:0.5", "--p", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    grid = make_grid(1024)
    d = float(out[0])
    assert d == dp(parse_potential("zero", grid), cos_potential(grid, 0.5), 1)
    assert abs(d - d1_envelope(parse_potential("zero", grid), cos_potential(grid, 0.5))) <= 10 / 1024


def test_dist_bad_spec(capsys):
    assert main(["dist", "--a", "zero", "--b", "bogus:1"]) == USAGE
    assert "error" in capsys.readouterr().err


def test_dist_psh_violation_is_usage(capsys):
    assert main(["dist", "--a", "zero", "--b", "cos:80"]) == USAGE


def test_missing_subcommand():
    assert main([]) == USAGE


def test_geodesic_equal_endpoints(tmp_path):
    out = tmp_path / "g"
    assert main(["geodesic", "--grid", "64", "--a", "cos:0.3", "--b", "cos:0.3", "--samples", "3", "--out", str(out)]) == 0
    rows = read_rows(f"{out}_samples.csv")[1:]
    by_t = {}
    for t, x, u in rows:
        by_t.setdefault(t, []).append(float(u))
    first = np.array(next(iter(by_t.values())))
    for values in by_t.values():
        assert np.max(np.abs(np.array(values) - first)) < 1e-12


def test_geodesic_constants(tmp_path):
    out = tmp_path / "g"
    assert main(["geodesic", "--grid", "64", "--a", "const:0", "--b", "const:1", "--samples", "5", "--out", str(out)]) == 0
    for t, _, u in read_rows(f"{out}_samples.csv")[1:]:
        assert float(u) == pytest.approx(float(t), abs=1e-12)


def test_geodesic_residual_table(tmp_path):
    out = tmp_path / "g"
    assert main(["geodesic", "--grid", "1024", "--a", "zero", "--b", "cos:0.5", "--samples", "3", "--out", str(out)]) == 0
    rows = read_rows(f"{out}_residual.csv")
    assert rows[0] == ["n", "residual", "ratio"]
    assert [int(r[0]) for r in rows[1:]] == [256, 512, 1024]
    assert all(float(r[2]) <= 0.6 for r in rows[2:])
    conv = dict(read_rows(f"{out}_convexity.csv")[1:])
    assert float(conv["am"]) <= 1e-10


def test_flow_stationary(tmp_path):
    out = tmp_path / "f"
    assert main(["flow", "--grid", "128", "--start", "zero", "--steps", "10", "--evi-points", "2", "--out", str(out)]) == 0
    diag = dict(read_rows(f"{out}_diag.csv")[1:])
    assert diag["classification"] == "Converged"
    assert diag["converged_step"] == "0"


def test_flow_cos(tmp_path):
    out = tmp_path / "f"
    assert main(["flow", "--grid", "256", "--start", "cos:0.5", "--out", str(out)]) == 0
    diag = dict(read_rows(f"{out}_diag.csv")[1:])
    assert diag["classification"] == "Converged"
    assert float(diag["d1_gap"]) <= 1e-3
    final = np.array([float(r[1]) for r in read_rows(f"{out}_final.csv")[1:]])
    assert np.ptp(final) <= 1e-3
    traj = read_rows(f"{out}_traj.csv")
    assert traj[0] == ["t", "AM", "K", "Ent", "d2_from_start", "step_d2"]
    assert len(traj) == 202


def test_flow_missing_twist(tmp_path):
    assert main(["flow", "--grid", "64", "--twist", str(tmp_path / "none.csv"), "--steps", "1"]) == USAGE


def test_solve_ma_uniform(capsys):
    assert main(["solve-ma", "--grid", "64", "--density", "uniform"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert all(float(r.split(",")[1]) == 0.0 for r in rows)


def test_solve_ma_eps_table(tmp_path):
    out = tmp_path / "m"
    assert main(["solve-ma", "--density", "cosdensity:0.5", "--eps", "1,0.1,0.01", "--out", str(out)]) == 0
    rows = read_rows(f"{out}_eps.csv")[1:]
    d1 = [float(r[1]) for r in rows]
    assert d1 == sorted(d1, reverse=True)
    assert all(float(r[-1]) <= 1e-10 for r in rows)


def test_solve_ma_bad_inputs(tmp_path):
    path = tmp_path / "rho.csv"
    grid = make_grid(64)
    write_density(path, DensityMeasure(grid, np.full(64, 2.0)))
    assert main(["solve-ma", "--grid", "64", "--density", str(path)]) == USAGE
    assert main(["solve-ma", "--grid", "64", "--density", "uniform", "--eps", "a,b"]) == USAGE


def test_approx_zero(tmp_path):
    out = tmp_path / "a"
    assert main(["approx", "--grid", "128", "--start", "zero", "--out", str(out)]) == 0
    rows = read_rows(f"{out}_stages.csv")[1:]
    assert all(float(r[2]) < 1e-12 and float(r[4]) < 1e-12 for r in rows)


def test_approx_gap_violation():
    assert main(["approx", "--grid", "64", "--start", "kinked:0.5", "--gap-tol", "1e-12"]) == VIOLATION


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid = 128\np = 1\n")
    assert main(["dist", "--config", str(cfg), "--a", "zero", "--b", "const:0.5"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "0.5"
    assert "d1_envelope" in out
    cfg.write_text("colour = red\n")
    assert main(["dist", "--config", str(cfg), "--a", "zero", "--b", "zero"]) == USAGE


def test_config_flag_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("a = const:3\nb = zero\n")
    assert main(["dist", "--config", str(cfg), "--a", "const:2", "--grid", "64"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "2.0"


def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["flow", "--grid", "64", "--steps", "20", "--seed", "7", "--evi-points", "3", "--out", str(out)]) == 0
        outs.append([(tmp_path / f"run{k}_{s}.csv").read_bytes() for s in ("traj", "final", "diag")])
    assert outs[0] == outs[1]
