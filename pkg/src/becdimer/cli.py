"""Command-line front end.

    becdimer <command> [--config PATH] [flags]

Commands: scan (observable maps at a fixed time), minscan (windowed
coherence minima), evolve (time series for one initial state), movie
(frame sequence of maps), fixedpoints, contours, compare (quantum vs
ensemble section at fixed phi).

Flags override config-file values. Exit codes: 0 success, 1 usage or
configuration error, 2 numerical failure. On any failure the files the
failing run had started to write are removed. Every output file records
a command line that regenerates it byte for byte.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys

import numpy as np

from . import __version__
from .gps import MAP_OBSERVABLES, min_c_quantum, movie_frames, quantum_series, scan_min_window, scan_quantum
from .io import (
    CONFIG_KEYS,
    ConfigError,
    DegenerateRangeError,
    RunConfig,
    format_float,
    parse_config,
    write_contours_csv,
    write_field_csv,
    write_fixed_points_csv,
    write_heatmap,
    write_series_csv,
)
from .lida import derive_seed, lida_min_c_window, sample_times
from .meanfield import (
    PhasePoint,
    classify_regime,
    fixed_points,
    iso_energy_contours,
    separatrix_energy,
    separatrix_z_at_zero_phase,
)
from .quantum import DiagonalizationError, build_hamiltonian, diagonalize

__all__ = ["main", "run", "build_parser", "reproduction_command"]

SERIES_OBSERVABLES = ("c", "E", "E_sc", "xi2", "mean_z")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="becdimer", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", default=None)
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--J", type=float, dest="J")
    p.add_argument("--Lambda", type=float, dest="Lambda")
    p.add_argument("--U", type=float, dest="U")
    p.add_argument("--phi", type=float, dest="phi")
    p.add_argument("--z", type=float, dest="z")
    p.add_argument("--tau", type=float, dest="tau")
    p.add_argument("--window", type=float, dest="window")
    p.add_argument("--grid", dest="grid", help="NPHIxNZ")
    p.add_argument("--observables", dest="observables", help="comma-separated names")
    p.add_argument("--engine", dest="engine", choices=("quantum", "lida"))
    p.add_argument("--M", type=int, dest="M")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--workers", type=int, dest="workers")
    p.add_argument("--out", dest="out", help="output path prefix")
    p.add_argument("--dt", type=float, dest="dt")
    p.add_argument("--dt-sample", type=float, dest="dt_sample")
    p.add_argument("--dt-frame", type=float, dest="dt_frame")
    p.add_argument("--levels", dest="levels", help="comma-separated energies")
    p.add_argument("--colormap", dest="colormap")
    p.add_argument("--range-min", type=float, dest="range_min")
    p.add_argument("--range-max", type=float, dest="range_max")
    return p


def config_from_argv(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    text = ""
    if ns.config is not None:
        try:
            with open(ns.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    overrides = {}
    for key in CONFIG_KEYS:
        val = getattr(ns, key, None)
        if val is not None:
            overrides[key] = val
    return parse_config(text, overrides)


def reproduction_command(cfg: RunConfig) -> str:
    """Flag-only command line that rebuilds this configuration exactly.

    Values equal to the built-in defaults are omitted; the interaction is
    always stated so the line stands on its own without the config file.
    """
    default = RunConfig()
    parts = ["becdimer", cfg.command, f"--N={cfg.N}", f"--J={format_float(cfg.J)}"]
    if cfg.lam is not None:
        parts.append(f"--Lambda={format_float(cfg.lam)}")
    else:
        parts.append(f"--U={format_float(cfg.U)}")
    scalar_flags = (
        ("phi", "--phi", format_float),
        ("z", "--z", format_float),
        ("tau", "--tau", format_float),
        ("window", "--window", format_float),
        ("dt", "--dt", format_float),
        ("dt_sample", "--dt-sample", format_float),
        ("dt_frame", "--dt-frame", format_float),
        ("engine", "--engine", str),
        ("M", "--M", str),
        ("seed", "--seed", str),
        ("workers", "--workers", str),
        ("colormap", "--colormap", str),
        ("range_min", "--range-min", format_float),
        ("range_max", "--range-max", format_float),
    )
    for attr, flag, fmt in scalar_flags:
        val = getattr(cfg, attr)
        if val is not None and val != getattr(default, attr):
            parts.append(f"{flag}={fmt(val)}")
    if cfg.grid != default.grid:
        parts.append(f"--grid={cfg.grid[0]}x{cfg.grid[1]}")
    if cfg.observables != default.observables:
        parts.append("--observables=" + ",".join(cfg.observables))
    if cfg.levels is not None:
        parts.append("--levels=" + ",".join(format_float(x) for x in cfg.levels))
    parts.append(shlex.quote(f"--out={cfg.out}"))
    return " ".join(parts)


def _require(cfg: RunConfig, attr: str, why: str):
    if getattr(cfg, attr) is None:
        raise ConfigError(f"missing required key: {attr} ({why})")


def _check_observables(names):
    for name in names:
        if name not in MAP_OBSERVABLES:
            raise ConfigError(f"invalid value for key: observables (unknown observable: {name})")


def _vrange(cfg: RunConfig):
    if cfg.range_min is None:
        return None
    return (cfg.range_min, cfg.range_max)


def _param_header(cfg: RunConfig, extra: list[str] | None = None) -> list[str]:
    p = cfg.params
    lines = [
        f"# becdimer {cfg.command}",
        f"# command={reproduction_command(cfg)}",
        f"# N={p.N}",
        f"# J={format_float(p.J)}",
        f"# U={format_float(p.U)}",
        f"# Lambda={format_float(p.lam)}",
    ]
    lines.extend(extra or [])
    lines.append(f"# version={__version__}")
    return lines


def _cmd_scan(cfg: RunConfig, written: list[str]):
    _require(cfg, "tau", "evolution time of the maps")
    if cfg.engine != "quantum":
        raise ConfigError("invalid value for key: engine (scan is quantum-only)")
    _check_observables(cfg.observables)
    cmd = reproduction_command(cfg)
    maps = scan_quantum(cfg.gridspec, cfg.params, cfg.tau, cfg.observables, workers=cfg.workers)
    for name in cfg.observables:
        path = f"{cfg.out}_{name}.csv"
        written.append(path)
        write_field_csv(maps[name], path, command=cmd)
        path = f"{cfg.out}_{name}.ppm"
        written.append(path)
        write_heatmap(maps[name], path, colormap=cfg.colormap, vrange=_vrange(cfg), command=cmd)


def _cmd_minscan(cfg: RunConfig, written: list[str]):
    _require(cfg, "window", "length of the minimization window")
    cmd = reproduction_command(cfg)
    f = scan_min_window(
        cfg.gridspec, cfg.params, cfg.window, dt_sample=cfg.dt_sample,
        engine=cfg.engine, workers=cfg.workers, M=cfg.M, seed=cfg.seed, dt=cfg.dt,
    )
    path = f"{cfg.out}_min_c.csv"
    written.append(path)
    write_field_csv(f, path, command=cmd)
    path = f"{cfg.out}_min_c.ppm"
    written.append(path)
    write_heatmap(f, path, colormap=cfg.colormap, vrange=_vrange(cfg), command=cmd)


def _cmd_evolve(cfg: RunConfig, written: list[str]):
    _require(cfg, "window", "total evolution time")
    if cfg.engine != "quantum":
        raise ConfigError("invalid value for key: engine (evolve is quantum-only)")
    times = sample_times(cfg.window, cfg.dt_sample)
    series = quantum_series(cfg.params, cfg.phi, cfg.z, times, SERIES_OBSERVABLES)
    columns = {"t": times}
    columns.update({name: series[name] for name in SERIES_OBSERVABLES})
    header = _param_header(cfg, [
        f"# phi={format_float(cfg.phi)}",
        f"# z={format_float(cfg.z)}",
        f"# window={format_float(cfg.window)}",
        f"# dt_sample={format_float(cfg.dt_sample)}",
        "# engine=quantum",
    ])
    path = f"{cfg.out}_series.csv"
    written.append(path)
    write_series_csv(path, columns, header)


def _cmd_movie(cfg: RunConfig, written: list[str]):
    if cfg.engine != "quantum":
        raise ConfigError("invalid value for key: engine (movie is quantum-only)")
    t_end = cfg.window if cfg.window is not None else 3.0
    observable = cfg.observables[0]
    _check_observables((observable,))
    cmd = reproduction_command(cfg)
    frames = movie_frames(
        cfg.gridspec, cfg.params, t_end=t_end, dt_frame=cfg.dt_frame,
        observable=observable, workers=cfg.workers,
    )
    vrange = _vrange(cfg)
    if vrange is None:
        finite = np.concatenate([f.values[np.isfinite(f.values)].ravel() for f in frames])
        if finite.size == 0:
            raise DegenerateRangeError("movie range is degenerate: no finite values")
        vrange = (float(np.min(finite)), float(np.max(finite)))
        if not vrange[1] > vrange[0]:
            raise DegenerateRangeError(f"movie range is degenerate: [{vrange[0]}, {vrange[1]}]")
    for k, f in enumerate(frames):
        path = f"{cfg.out}_frame_{k:04d}.ppm"
        written.append(path)
        write_heatmap(f, path, colormap=cfg.colormap, vrange=vrange, command=cmd)


def _cmd_fixedpoints(cfg: RunConfig, written: list[str]):
    lam = cfg.params.lam
    extra = [f"# regime={classify_regime(lam)}"]
    esep = separatrix_energy(lam)
    if esep is not None:
        extra.append(f"# separatrix_energy={format_float(esep)}")
    zsep = separatrix_z_at_zero_phase(lam)
    if zsep is not None:
        extra.append(f"# separatrix_z_at_zero_phase={format_float(zsep)}")
    header = _param_header(cfg, extra)
    path = f"{cfg.out}_fixedpoints.csv"
    written.append(path)
    write_fixed_points_csv(path, fixed_points(lam), header)


def _default_levels(lam: float):
    top = 1.0
    if lam > 1.0:
        top = max(top, 0.5 * lam + 0.5 / lam)
    ladder = list(np.linspace(-1.0, top, 13)[1:-1])
    if lam > 1.0:
        ladder.append(1.0)
    return tuple(sorted(set(float(x) for x in ladder)))


def _cmd_contours(cfg: RunConfig, written: list[str]):
    lam = cfg.params.lam
    levels = cfg.levels if cfg.levels is not None else _default_levels(lam)
    polys = iso_energy_contours(lam, levels, grid=cfg.grid)
    header = _param_header(cfg, [
        "# levels=" + ",".join(format_float(x) for x in levels),
        f"# grid={cfg.grid[0]}x{cfg.grid[1]}",
    ])
    path = f"{cfg.out}_contours.csv"
    written.append(path)
    write_contours_csv(path, levels, polys, header)


def _cmd_compare(cfg: RunConfig, written: list[str]):
    _require(cfg, "window", "length of the minimization window")
    params = cfg.params
    spec = diagonalize(build_hamiltonian(params))
    zs = cfg.gridspec.z_values
    cq = np.empty(zs.size)
    cl = np.empty(zs.size)
    for j, z in enumerate(zs):
        cq[j] = min_c_quantum(cfg.phi, float(z), params, spec, cfg.window, cfg.dt_sample)
        cl[j] = lida_min_c_window(
            PhasePoint(cfg.phi, float(z)), params.N, params.lam, cfg.window,
            cfg.dt_sample, cfg.M, derive_seed(cfg.seed, j), cfg.dt, params.J,
            workers=cfg.workers,
        )
    header = _param_header(cfg, [
        f"# phi={format_float(cfg.phi)}",
        f"# window={format_float(cfg.window)}",
        f"# dt_sample={format_float(cfg.dt_sample)}",
        f"# seed={cfg.seed}",
        f"# M={cfg.M}",
        f"# grid={cfg.grid[0]}x{cfg.grid[1]}",
    ])
    path = f"{cfg.out}_compare.csv"
    written.append(path)
    write_series_csv(path, {"z": zs, "c_quantum": cq, "c_lida": cl}, header)


_HANDLERS = {
    "scan": _cmd_scan,
    "minscan": _cmd_minscan,
    "evolve": _cmd_evolve,
    "movie": _cmd_movie,
    "fixedpoints": _cmd_fixedpoints,
    "contours": _cmd_contours,
    "compare": _cmd_compare,
}


def run(cfg: RunConfig) -> list[str]:
    """Execute one command; returns the written paths, removing them on failure."""
    written: list[str] = []
    try:
        _HANDLERS[cfg.command](cfg, written)
    except BaseException:
        for path in written:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise
    return written


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = config_from_argv(argv)
        run(cfg)
    except (DiagonalizationError, DegenerateRangeError,
            np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"becdimer: numerical failure: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"becdimer: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"becdimer: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
