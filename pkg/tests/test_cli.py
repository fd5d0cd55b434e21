"""End-to-end tests of the command line and file formats.

Every command is driven through main() against temporary directories; byte
identity of reruns and of the embedded reproduction command is part of the
contract, not just numeric closeness.
"""

import math
import shlex

import numpy as np
import pytest

from becdimer.cli import build_parser, config_from_argv, main, reproduction_command
from becdimer.gps import FieldMap, GridSpec, scan_quantum
from becdimer.io import (
    ConfigError,
    DegenerateRangeError,
    RunConfig,
    parse_config,
    read_field_csv,
    read_ppm,
    write_heatmap,
)
from becdimer.quantum import DiagonalizationError, ModelParams


def _data_lines(path):
    out = []
    for line in path.read_text().splitlines():
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _header_value(path, key):
    prefix = f"# {key}="
    for line in path.read_text().splitlines():
        if line.startswith(prefix):
            return line[len(prefix):]
    raise AssertionError(f"no header {key} in {path}")


# ---------------------------------------------------------------- config


def test_parse_config_derives_interaction():
    cfg = parse_config("command=scan\nN=40, J=10, Lambda=5\ntau=1")
    assert cfg.command == "scan"
    assert cfg.lam == 5.0 and cfg.U is None
    assert cfg.params.U == 2.5 and cfg.params.lam == 5.0
    assert cfg.tau == 1.0
    cfg2 = parse_config("command=scan, N=40, J=10, U=2.5, tau=1")
    assert cfg2.params.lam == 5.0


def test_parse_config_rejects_double_interaction():
    with pytest.raises(ConfigError, match="over-determined"):
        parse_config("command=scan, Lambda=5, U=2.5, tau=1")


def test_parse_config_requires_interaction():
    with pytest.raises(ConfigError, match="one of U, Lambda"):
        parse_config("command=scan, tau=1")


def test_parse_config_unknown_key():
    with pytest.raises(ConfigError, match="unknown key: comand"):
        parse_config("comand=scan, Lambda=5")


def test_parse_config_missing_command():
    with pytest.raises(ConfigError, match="command"):
        parse_config("Lambda=5, tau=1")


def test_parse_config_rejects_nonfinite():
    with pytest.raises(ConfigError, match="non-finite value for key: J"):
        parse_config("command=scan, J=inf, Lambda=5, tau=1")


def test_parse_config_malformed_line():
    with pytest.raises(ConfigError, match="malformed config line"):
        parse_config("command=scan\njust words\nLambda=5")


def test_parse_config_comments_and_commas():
    text = "# a run\ncommand=evolve, N=40  # trailing note\nJ=10\nLambda=5, window=2\n"
    cfg = parse_config(text)
    assert cfg.command == "evolve" and cfg.window == 2.0


def test_parse_config_grid_and_observables():
    # inside a file, commas separate entries, so lists use whitespace
    cfg = parse_config("command=scan, Lambda=5, tau=1, grid=200x101, observables=c E")
    assert cfg.grid == (200, 101)
    assert cfg.observables == ("c", "E")
    with pytest.raises(ConfigError, match="grid"):
        parse_config("command=scan, Lambda=5, tau=1, grid=200")


def test_parse_config_validates_ranges():
    with pytest.raises(ConfigError, match="z"):
        parse_config("command=scan, Lambda=5, tau=1, z=1.5")
    with pytest.raises(ConfigError, match="range"):
        parse_config("command=scan, Lambda=5, tau=1, range_min=0.5")
    with pytest.raises(ConfigError):
        parse_config("command=scan, Lambda=5, tau=1, range_min=1, range_max=0")
    with pytest.raises(ConfigError, match="unknown command"):
        parse_config("command=explode, Lambda=5, tau=1")


def test_flag_interaction_replaces_file_interaction():
    cfg = parse_config("command=scan, U=2.5, tau=1", {"Lambda": "8"})
    assert cfg.lam == 8.0 and cfg.U is None
    assert cfg.params.U == pytest.approx(8.0 * 2 * 10.0 / 40, abs=1e-15)


def test_flags_match_file_config(tmp_path):
    text = "command=scan\nN=30, J=8, Lambda=4, tau=0.5, grid=6x5, observables=c E, seed=3\n"
    from_file = parse_config(text)
    argv = [
        "scan", "--N", "30", "--J", "8", "--Lambda", "4", "--tau", "0.5",
        "--grid", "6x5", "--observables", "c,E", "--seed", "3",
    ]
    from_flags = config_from_argv(argv)
    assert from_flags == from_file


def test_config_file_flag(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("command=fixedpoints, Lambda=5, out=fp\n")
    cfg = config_from_argv(["--config", str(p), "--Lambda", "3"])
    assert cfg.command == "fixedpoints"
    assert cfg.lam == 3.0


def test_parser_rejects_unknown_flag():
    with pytest.raises(ConfigError):
        build_parser().parse_args(["scan", "--bogus", "1"])


def test_reproduction_command_is_plain_flags():
    cfg = parse_config("command=scan, Lambda=5, tau=1, grid=6x5, seed=2, out=here")
    cmd = reproduction_command(cfg)
    assert cmd.startswith("becdimer scan ")
    assert "--Lambda=5" in cmd and "--tau=1" in cmd
    assert "--grid=6x5" in cmd and "--out=here" in cmd
    assert "--seed=2" in cmd
    assert "--U=" not in cmd


# ---------------------------------------------------------------- exit codes


def test_main_without_arguments_fails(capsys):
    assert main([]) == 1
    assert "command" in capsys.readouterr().err


def test_main_unknown_command(capsys):
    assert main(["explode", "--Lambda", "5"]) == 1
    assert "unknown command" in capsys.readouterr().err


def test_main_unknown_flag(capsys):
    assert main(["scan", "--bogus", "1"]) == 1


def test_scan_requires_tau(tmp_path, capsys):
    assert main(["scan", "--Lambda", "5", "--out", str(tmp_path / "x")]) == 1
    assert "tau" in capsys.readouterr().err


def test_evolve_requires_window(tmp_path, capsys):
    assert main(["evolve", "--Lambda", "5", "--out", str(tmp_path / "x")]) == 1
    assert "window" in capsys.readouterr().err


def test_scan_rejects_lida_engine(tmp_path, capsys):
    rc = main([
        "scan", "--Lambda", "5", "--tau", "1", "--engine", "lida",
        "--out", str(tmp_path / "x"),
    ])
    assert rc == 1


def test_numerical_failure_exits_two(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise DiagonalizationError("synthetic failure")

    monkeypatch.setattr("becdimer.cli.scan_quantum", boom)
    rc = main([
        "scan", "--Lambda", "5", "--tau", "0.1", "--grid", "3x2",
        "--out", str(tmp_path / "x"),
    ])
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_partial_outputs_removed_on_failure(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise DegenerateRangeError("synthetic failure")

    monkeypatch.setattr("becdimer.cli.write_heatmap", boom)
    rc = main([
        "scan", "--Lambda", "5", "--tau", "0.1", "--grid", "3x2",
        "--out", str(tmp_path / "x"),
    ])
    assert rc == 2
    assert list(tmp_path.iterdir()) == []


# ---------------------------------------------------------------- scan files


def test_scan_writes_csv_and_ppm(tmp_path):
    out = tmp_path / "sc"
    argv = [
        "scan", "--N", "40", "--J", "10", "--Lambda", "5", "--tau", "0.3",
        "--grid", "6x5", "--observables", "c,E", "--out", str(out),
    ]
    assert main(argv) == 0
    for obs in ("c", "E"):
        assert (tmp_path / f"sc_{obs}.csv").exists()
        assert (tmp_path / f"sc_{obs}.ppm").exists()
    csv = tmp_path / "sc_c.csv"
    assert _header_value(csv, "Lambda") == "5"
    assert _header_value(csv, "columns") == "phi,z,value"
    assert len(_data_lines(csv)) == 30


def test_scan_values_round_trip_exactly(tmp_path):
    out = tmp_path / "sc"
    assert main([
        "scan", "--Lambda", "5", "--tau", "0.3", "--grid", "6x5",
        "--out", str(out),
    ]) == 0
    meta, phi, z, values = read_field_csv(tmp_path / "sc_c.csv")
    grid = GridSpec(6, 5)
    want = scan_quantum(grid, ModelParams(N=40, J=10.0, lam=5.0), 0.3, ("c",))["c"]
    assert np.array_equal(values, want.values)
    assert np.array_equal(phi, grid.phi_values)
    assert np.array_equal(z, grid.z_values)
    assert meta["observable"] == "c"


def test_scan_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "sc"
    argv = ["scan", "--Lambda", "5", "--tau", "0.3", "--grid", "5x4", "--out", str(out)]
    assert main(argv) == 0
    first = (tmp_path / "sc_c.csv").read_bytes(), (tmp_path / "sc_c.ppm").read_bytes()
    assert main(argv) == 0
    second = (tmp_path / "sc_c.csv").read_bytes(), (tmp_path / "sc_c.ppm").read_bytes()
    assert first == second


def test_scan_worker_count_leaves_data_unchanged(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    base = ["scan", "--Lambda", "5", "--tau", "0.3", "--grid", "5x4"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--workers", "2", "--out", str(b)]) == 0
    assert _data_lines(tmp_path / "a_c.csv") == _data_lines(tmp_path / "b_c.csv")


def test_embedded_command_reproduces_file(tmp_path):
    out = tmp_path / "sc"
    assert main([
        "scan", "--Lambda", "5", "--tau", "0.2", "--grid", "4x3", "--out", str(out),
    ]) == 0
    csv = tmp_path / "sc_c.csv"
    original = csv.read_bytes()
    parts = shlex.split(_header_value(csv, "command"))
    assert parts[0] == "becdimer"
    for p in tmp_path.iterdir():
        p.unlink()
    assert main(parts[1:]) == 0
    assert csv.read_bytes() == original


def test_minscan_lida_deterministic(tmp_path):
    base = [
        "minscan", "--Lambda", "5", "--window", "0.02", "--grid", "3x2",
        "--engine", "lida", "--M", "50", "--seed", "4",
    ]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--out", str(tmp_path / "b")]) == 0
    assert main(base + ["--workers", "2", "--out", str(tmp_path / "c")]) == 0
    a = tmp_path / "a_min_c.csv"
    assert _header_value(a, "engine") == "lida"
    assert _header_value(a, "M") == "50"
    assert _header_value(a, "seed") == "4"
    a_lines = _data_lines(a)
    assert a_lines == _data_lines(tmp_path / "b_min_c.csv")
    assert a_lines == _data_lines(tmp_path / "c_min_c.csv")


def test_minscan_quantum(tmp_path):
    assert main([
        "minscan", "--Lambda", "5", "--window", "0.05", "--grid", "3x2",
        "--out", str(tmp_path / "q"),
    ]) == 0
    csv = tmp_path / "q_min_c.csv"
    assert _header_value(csv, "engine") == "quantum"
    vals = [float(line.split(",")[2]) for line in _data_lines(csv)]
    assert all(0.0 <= v <= 1.0 for v in vals)


# ---------------------------------------------------------------- evolve


def test_evolve_series_columns_and_values(tmp_path):
    assert main([
        "evolve", "--Lambda", "5", "--phi", "0", "--z", "0.2",
        "--window", "0.1", "--out", str(tmp_path / "ev"),
    ]) == 0
    csv = tmp_path / "ev_series.csv"
    assert _header_value(csv, "columns") == "t,c,E,E_sc,xi2,mean_z"
    lines = _data_lines(csv)
    assert len(lines) == 11
    first = [float(x) for x in lines[0].split(",")]
    assert first[0] == 0.0
    assert abs(first[1] - 1.0) < 1e-12
    assert abs(first[5] - 0.2) < 1e-12
    times = [float(line.split(",")[0]) for line in lines]
    np.testing.assert_allclose(np.diff(times), 0.01, rtol=0, atol=1e-12)


# ---------------------------------------------------------------- heatmaps


def test_uniform_map_renders_top_of_scale(tmp_path):
    assert main([
        "scan", "--Lambda", "5", "--tau", "0", "--grid", "4x3",
        "--range-min", "0.5", "--range-max", "1", "--out", str(tmp_path / "u"),
    ]) == 0
    meta, img = read_ppm(tmp_path / "u_c.ppm")
    assert img.shape == (3, 4, 3)
    assert np.all(img.reshape(-1, 3) == np.array([253, 231, 37], dtype=np.uint8))
    assert meta["range"] == "0.5,1"


def test_heatmap_orientation_top_row_is_positive_z(tmp_path):
    grid = GridSpec(4, 5)
    vals = np.tile(grid.z_values, (4, 1))
    f = FieldMap(grid=grid, observable="zmap", values=vals,
                 params=ModelParams(N=40, J=10.0, lam=5.0))
    path = tmp_path / "z.ppm"
    write_heatmap(f, path, colormap="gray", vrange=(-0.8, 0.8))
    _, img = read_ppm(path)
    assert img.shape == (5, 4, 3)
    assert np.all(img[0] == 255)
    assert np.all(img[-1] == 0)


def test_heatmap_marks_missing_values(tmp_path):
    grid = GridSpec(3, 3)
    vals = np.zeros((3, 3))
    vals[2, 0] = np.nan
    f = FieldMap(grid=grid, observable="x", values=vals,
                 params=ModelParams(N=40, J=10.0, lam=5.0))
    path = tmp_path / "n.ppm"
    write_heatmap(f, path, colormap="gray", vrange=(0.0, 1.0))
    _, img = read_ppm(path)
    # phi index 2 is the rightmost column, z index 0 the bottom row
    assert tuple(img[2, 2]) == (255, 0, 255)
    assert tuple(img[0, 0]) == (0, 0, 0)


def test_heatmap_degenerate_range_raises(tmp_path):
    grid = GridSpec(2, 2)
    f = FieldMap(grid=grid, observable="x", values=np.ones((2, 2)),
                 params=ModelParams(N=40, J=10.0, lam=5.0))
    with pytest.raises(DegenerateRangeError):
        write_heatmap(f, tmp_path / "d.ppm")
    g = FieldMap(grid=grid, observable="x", values=np.full((2, 2), np.nan),
                 params=ModelParams(N=40, J=10.0, lam=5.0))
    with pytest.raises(DegenerateRangeError):
        write_heatmap(g, tmp_path / "e.ppm", vrange=None)


def test_heatmap_unknown_colormap(tmp_path):
    grid = GridSpec(2, 2)
    f = FieldMap(grid=grid, observable="x", values=np.eye(2),
                 params=ModelParams(N=40, J=10.0, lam=5.0))
    with pytest.raises(ConfigError):
        write_heatmap(f, tmp_path / "c.ppm", colormap="sunset")


# ---------------------------------------------------------------- movie


def test_movie_writes_frames_with_shared_range(tmp_path):
    argv = [
        "movie", "--Lambda", "5", "--window", "0.05", "--dt-frame", "0.025",
        "--grid", "4x3", "--out", str(tmp_path / "mv"),
    ]
    assert main(argv) == 0
    frames = sorted(tmp_path.glob("mv_frame_*.ppm"))
    assert [p.name for p in frames] == [f"mv_frame_{k:04d}.ppm" for k in range(3)]
    ranges = {read_ppm(p)[0]["range"] for p in frames}
    assert len(ranges) == 1
    before = [p.read_bytes() for p in frames]
    assert main(argv) == 0
    assert [p.read_bytes() for p in frames] == before


# ---------------------------------------------------------------- analysis


def test_fixedpoints_file(tmp_path):
    assert main(["fixedpoints", "--Lambda", "5", "--out", str(tmp_path / "fp")]) == 0
    csv = tmp_path / "fp_fixedpoints.csv"
    assert "running" in _header_value(csv, "regime")
    assert _header_value(csv, "separatrix_energy") == "1"
    assert float(_header_value(csv, "separatrix_z_at_zero_phase")) == pytest.approx(0.8)
    lines = _data_lines(csv)
    assert len(lines) == 4
    assert lines[0] == "0,0,stable-center"
    assert lines[1].endswith("hyperbolic")
    zs = sorted(float(line.split(",")[1]) for line in lines)
    assert zs[0] == pytest.approx(-math.sqrt(24) / 5, abs=1e-14)


def test_contours_file_blocks(tmp_path):
    assert main([
        "contours", "--Lambda", "5", "--levels", "1.0", "--grid", "64x64",
        "--out", str(tmp_path / "ct"),
    ]) == 0
    text = (tmp_path / "ct_contours.csv").read_text()
    assert "# level=1" in text
    blocks = [b for b in text.split("\n\n") if "# level=" in b]
    assert blocks
    row = next(line for line in text.splitlines() if line and not line.startswith("#"))
    phi, z = (float(x) for x in row.split(","))
    assert 0.0 <= phi <= 2 * math.pi and -1.0 <= z <= 1.0


def test_contours_default_levels(tmp_path):
    assert main([
        "contours", "--Lambda", "5", "--grid", "64x64", "--out", str(tmp_path / "ct"),
    ]) == 0
    text = (tmp_path / "ct_contours.csv").read_text()
    levels = {line for line in text.splitlines() if line.startswith("# level=")}
    assert len(levels) == 12


def test_compare_profiles(tmp_path):
    assert main([
        "compare", "--Lambda", "5", "--window", "0.02", "--grid", "2x5",
        "--M", "40", "--out", str(tmp_path / "cp"),
    ]) == 0
    csv = tmp_path / "cp_compare.csv"
    assert _header_value(csv, "columns") == "z,c_quantum,c_lida"
    lines = _data_lines(csv)
    assert len(lines) == 5
    for line in lines:
        z, cq, cl = (float(x) for x in line.split(","))
        assert -1.0 <= z <= 1.0
        assert 0.4 <= cq <= 1.0 and 0.4 <= cl <= 1.0


# ---------------------------------------------------------------- defaults


def test_run_config_defaults():
    cfg = RunConfig()
    assert cfg.N == 40 and cfg.J == 10.0
    assert cfg.grid == (200, 101)
    assert cfg.engine == "quantum"
    assert cfg.M == 10000 and cfg.seed == 0
    assert cfg.dt == 1e-4 and cfg.dt_sample == 0.01 and cfg.dt_frame == 0.025
