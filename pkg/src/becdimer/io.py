"""Run configuration and file output.

Config files are plain key=value lines ('#' starts a comment; commas may
separate several pairs on one line). Command-line flags override file
values. Field maps are written as CSV with '#'-prefixed metadata headers
and one "phi,z,value" row per grid cell in row-major order, 17
significant digits so that reading the file back reproduces every float
bit-exactly. Heatmaps are binary PPM (P6), one pixel per grid cell, phi
along the horizontal axis and z = +1 at the top.

Nothing here embeds timestamps or machine state: rerunning a command
with the same configuration reproduces every output byte for byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .gps import FieldMap, GridSpec
from .quantum import ModelParams

__all__ = [
    "ConfigError",
    "DegenerateRangeError",
    "RunConfig",
    "COMMANDS",
    "CONFIG_KEYS",
    "parse_config",
    "format_float",
    "write_field_csv",
    "read_field_csv",
    "write_heatmap",
    "read_ppm",
    "write_series_csv",
    "write_contours_csv",
    "write_fixed_points_csv",
    "COLORMAPS",
    "NAN_COLOR",
]


class ConfigError(Exception):
    """Unusable run configuration or command line."""


class DegenerateRangeError(RuntimeError):
    """Heatmap color range has zero width."""


COMMANDS = ("scan", "minscan", "evolve", "movie", "fixedpoints", "contours", "compare")

ENGINES = ("quantum", "lida")


def format_float(x) -> str:
    return f"{float(x):.17g}"


def _parse_float(key: str, text) -> float:
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for key: {key}") from None
    if not np.isfinite(val):
        raise ConfigError(f"non-finite value for key: {key}")
    return val


def _parse_int(key: str, text) -> int:
    try:
        return int(str(text), 10)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for key: {key}") from None


def _parse_grid(key: str, text):
    if isinstance(text, tuple):
        return text
    parts = str(text).lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"invalid value for key: {key} (expected NPHIxNZ)")
    return (_parse_int(key, parts[0]), _parse_int(key, parts[1]))


def _parse_observables(key: str, text):
    # commas separate config entries, so file values use whitespace;
    # flag values may use either
    if isinstance(text, tuple):
        return text
    names = tuple(s for s in re.split(r"[,\s]+", str(text)) if s)
    if not names:
        raise ConfigError(f"invalid value for key: {key}")
    return names


def _parse_levels(key: str, text):
    if isinstance(text, tuple):
        return text
    return tuple(_parse_float(key, s) for s in re.split(r"[,\s]+", str(text)) if s)


def _parse_str(key: str, text) -> str:
    return str(text).strip()


# key -> (RunConfig attribute, caster)
CONFIG_KEYS = {
    "command": ("command", _parse_str),
    "N": ("N", _parse_int),
    "J": ("J", _parse_float),
    "U": ("U", _parse_float),
    "Lambda": ("lam", _parse_float),
    "phi": ("phi", _parse_float),
    "z": ("z", _parse_float),
    "tau": ("tau", _parse_float),
    "window": ("window", _parse_float),
    "grid": ("grid", _parse_grid),
    "observables": ("observables", _parse_observables),
    "engine": ("engine", _parse_str),
    "M": ("M", _parse_int),
    "seed": ("seed", _parse_int),
    "workers": ("workers", _parse_int),
    "out": ("out", _parse_str),
    "dt": ("dt", _parse_float),
    "dt_sample": ("dt_sample", _parse_float),
    "dt_frame": ("dt_frame", _parse_float),
    "levels": ("levels", _parse_levels),
    "colormap": ("colormap", _parse_str),
    "range_min": ("range_min", _parse_float),
    "range_max": ("range_max", _parse_float),
}


@dataclass
class RunConfig:
    """Everything a command needs; exactly one of U and lam must be set."""

    command: str | None = None
    N: int = 40
    J: float = 10.0
    U: float | None = None
    lam: float | None = None
    phi: float = 0.0
    z: float = 0.0
    tau: float | None = None
    window: float | None = None
    grid: tuple[int, int] = (200, 101)
    observables: tuple[str, ...] = ("c",)
    engine: str = "quantum"
    M: int = 10000
    seed: int = 0
    workers: int = 1
    out: str = "becdimer"
    dt: float = 1e-4
    dt_sample: float = 0.01
    dt_frame: float = 0.025
    levels: tuple[float, ...] | None = None
    colormap: str = "viridis"
    range_min: float | None = None
    range_max: float | None = None

    @property
    def params(self) -> ModelParams:
        if self.U is not None:
            return ModelParams(N=self.N, J=self.J, U=self.U)
        return ModelParams(N=self.N, J=self.J, lam=self.lam)

    @property
    def gridspec(self) -> GridSpec:
        return GridSpec(nphi=self.grid[0], nz=self.grid[1])


def _read_pairs(text: str):
    pairs = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for item in line.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ConfigError(f"malformed config line: {item!r}")
            key, val = item.split("=", 1)
            pairs.append((key.strip(), val.strip()))
    return pairs


def parse_config(text: str = "", overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from config-file text plus flag overrides.

    Overrides are already-typed values keyed by config key name; they win
    over file values. Giving both U and Lambda in one source is rejected;
    a flag-side interaction replaces the file-side one entirely.
    """
    file_vals: dict[str, object] = {}
    for key, raw in _read_pairs(text):
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key: {key}")
        _, caster = CONFIG_KEYS[key]
        file_vals[key] = caster(key, raw)
    overrides = dict(overrides or {})
    for key, val in overrides.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key: {key}")
        _, caster = CONFIG_KEYS[key]
        overrides[key] = caster(key, val)

    if "U" in overrides and "Lambda" in overrides:
        raise ConfigError("over-determined interaction: give exactly one of U, Lambda")
    if "U" in overrides or "Lambda" in overrides:
        file_vals.pop("U", None)
        file_vals.pop("Lambda", None)
    elif "U" in file_vals and "Lambda" in file_vals:
        raise ConfigError("over-determined interaction: give exactly one of U, Lambda")

    merged = {**file_vals, **overrides}
    cfg = RunConfig()
    for key, val in merged.items():
        attr, _ = CONFIG_KEYS[key]
        setattr(cfg, attr, val)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.command is None:
        raise ConfigError("missing required key: command")
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command: {cfg.command}")
    if cfg.N < 1:
        raise ConfigError("invalid value for key: N (must be >= 1)")
    if cfg.J <= 0 or not np.isfinite(cfg.J):
        raise ConfigError("invalid value for key: J (must be positive)")
    if cfg.U is None and cfg.lam is None:
        raise ConfigError("missing required key: give one of U, Lambda")
    if cfg.U is not None and cfg.lam is not None:
        raise ConfigError("over-determined interaction: give exactly one of U, Lambda")
    if not -1.0 <= cfg.z <= 1.0:
        raise ConfigError("invalid value for key: z (must lie in [-1, 1])")
    if cfg.tau is not None and cfg.tau < 0:
        raise ConfigError("invalid value for key: tau (must be nonnegative)")
    if cfg.window is not None and cfg.window < 0:
        raise ConfigError("invalid value for key: window (must be nonnegative)")
    if cfg.grid[0] < 2 or cfg.grid[1] < 2:
        raise ConfigError("invalid value for key: grid (must be at least 2x2)")
    if cfg.engine not in ENGINES:
        raise ConfigError(f"invalid value for key: engine (unknown engine: {cfg.engine})")
    if cfg.M < 1:
        raise ConfigError("invalid value for key: M (must be >= 1)")
    if cfg.workers < 1:
        raise ConfigError("invalid value for key: workers (must be >= 1)")
    for key in ("dt", "dt_sample", "dt_frame"):
        if getattr(cfg, key) <= 0:
            raise ConfigError(f"invalid value for key: {key} (must be positive)")
    if not cfg.observables:
        raise ConfigError("invalid value for key: observables")
    if (cfg.range_min is None) != (cfg.range_max is None):
        raise ConfigError("missing required key: give both range_min and range_max")
    if cfg.range_min is not None and cfg.range_max is not None:
        if not cfg.range_max > cfg.range_min:
            raise ConfigError("invalid value for key: range_max (must exceed range_min)")


# ---------------------------------------------------------------------------
# writers

FILE_VERSION_KEY = "version"


def _field_header_lines(f: FieldMap, command: str | None) -> list[str]:
    from . import __version__

    lines = ["# becdimer field map"]
    if command:
        lines.append(f"# command={command}")
    lines.append(f"# observable={f.observable}")
    lines.append(f"# N={f.params.N}")
    lines.append(f"# J={format_float(f.params.J)}")
    lines.append(f"# U={format_float(f.params.U)}")
    lines.append(f"# Lambda={format_float(f.params.lam)}")
    if f.tau is not None:
        lines.append(f"# tau={format_float(f.tau)}")
    if f.window is not None:
        lines.append(f"# window={format_float(f.window)}")
    if f.dt_sample is not None:
        lines.append(f"# dt_sample={format_float(f.dt_sample)}")
    lines.append(f"# engine={f.engine}")
    if f.seed is not None:
        lines.append(f"# seed={f.seed}")
    if f.M is not None:
        lines.append(f"# M={f.M}")
    lines.append(f"# grid={f.grid.nphi}x{f.grid.nz}")
    lines.append(f"# {FILE_VERSION_KEY}=" + __version__)
    return lines


def write_field_csv(f: FieldMap, path: str, command: str | None = None):
    """Field map as CSV: metadata headers, then phi,z,value rows in row-major order."""
    phis = f.grid.phi_values
    zs = f.grid.z_values
    lines = _field_header_lines(f, command)
    lines.append("# columns=phi,z,value")
    for i in range(f.grid.nphi):
        for j in range(f.grid.nz):
            lines.append(
                f"{format_float(phis[i])},{format_float(zs[j])},{format_float(f.values[i, j])}"
            )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path: str):
    """Parse a field-map CSV back into (metadata dict, phi, z, values).

    phi and z are the distinct axis values; values has shape (nphi, nz),
    recovered from the grid recorded in the header.
    """
    meta = {}
    phi, z, val = [], [], []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, v = body.split("=", 1)
                    meta[key.strip()] = v.strip()
                continue
            a, b, c = line.split(",")
            phi.append(float(a))
            z.append(float(b))
            val.append(float(c))
    nphi, nz = (int(s) for s in meta["grid"].split("x"))
    values = np.array(val).reshape(nphi, nz)
    return meta, np.array(phi[::nz]), np.array(z[:nz]), values


# fixed anchor tables; linear interpolation in between
COLORMAPS = {
    "viridis": (
        (68, 1, 84), (70, 50, 127), (54, 92, 141), (39, 127, 143),
        (31, 161, 135), (74, 194, 109), (159, 218, 58), (253, 231, 37),
    ),
    "gray": ((0, 0, 0), (255, 255, 255)),
    "coolwarm": ((59, 76, 192), (221, 221, 221), (180, 4, 38)),
}

NAN_COLOR = (255, 0, 255)


def _apply_colormap(t: np.ndarray, name: str) -> np.ndarray:
    try:
        stops = np.array(COLORMAPS[name], dtype=float)
    except KeyError:
        raise ConfigError(f"invalid value for key: colormap (unknown colormap: {name})") from None
    pos = t * (len(stops) - 1)
    i0 = np.clip(pos.astype(int), 0, len(stops) - 2)
    frac = pos - i0
    rgb = stops[i0] + frac[..., None] * (stops[i0 + 1] - stops[i0])
    return np.floor(rgb + 0.5).astype(np.uint8)


def write_heatmap(f: FieldMap, path: str, colormap: str = "viridis",
                  vrange: tuple[float, float] | None = None,
                  command: str | None = None):
    """Binary PPM rendering, one pixel per cell, z = +1 at the top row.

    Values are clamped to the color range; NaN cells get a fixed sentinel
    color. A degenerate range (max = min) is an error.
    """
    v = f.values
    if vrange is None:
        finite = v[np.isfinite(v)]
        if finite.size == 0:
            raise DegenerateRangeError("heatmap range is degenerate: no finite values")
        lo, hi = float(np.min(finite)), float(np.max(finite))
    else:
        lo, hi = float(vrange[0]), float(vrange[1])
    if not hi > lo:
        raise DegenerateRangeError(f"heatmap range is degenerate: [{lo}, {hi}]")
    # image rows top to bottom = z descending; columns = phi ascending
    img_vals = v.T[::-1, :]
    nan_mask = ~np.isfinite(img_vals)
    t = np.clip((np.where(nan_mask, lo, img_vals) - lo) / (hi - lo), 0.0, 1.0)
    rgb = _apply_colormap(t, colormap)
    rgb[nan_mask] = NAN_COLOR
    header = ["P6"]
    for line in _field_header_lines(f, command):
        header.append(line)
    header.append(f"# range={format_float(lo)},{format_float(hi)}")
    header.append(f"# colormap={colormap}")
    header.append(f"{f.grid.nphi} {f.grid.nz}")
    header.append("255")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode())
        fh.write(rgb.tobytes())


def read_ppm(path: str):
    """Parse a PPM written by write_heatmap: (meta dict, (h, w, 3) uint8 array)."""
    with open(path, "rb") as fh:
        data = fh.read()
    meta = {}
    pos = 0
    tokens = []
    while len(tokens) < 4:
        nl = data.index(b"\n", pos)
        line = data[pos:nl].decode()
        pos = nl + 1
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, v = body.split("=", 1)
                meta[key.strip()] = v.strip()
            continue
        tokens.extend(line.split())
    w, h = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data[pos:], dtype=np.uint8).reshape(h, w, 3)
    return meta, pixels


def write_series_csv(path: str, columns: dict[str, np.ndarray], header_lines: list[str]):
    """Time-series CSV: metadata headers, a column-name line, then data rows."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    lines = list(header_lines)
    lines.append("# columns=" + ",".join(names))
    for k in range(n):
        lines.append(",".join(format_float(columns[name][k]) for name in names))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_contours_csv(path: str, levels, polylines_per_level, header_lines: list[str]):
    """Iso-energy polylines: one blank-line-separated block of phi,z rows each."""
    lines = list(header_lines)
    lines.append("# columns=phi,z")
    blocks = []
    for level, polylines in zip(levels, polylines_per_level):
        for poly in polylines:
            block = [f"# level={format_float(level)}"]
            for x, y in poly:
                block.append(f"{format_float(x)},{format_float(y)}")
            blocks.append("\n".join(block))
    body = "\n\n".join(blocks)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
        if body:
            fh.write(body + "\n")


def write_fixed_points_csv(path: str, points, header_lines: list[str]):
    """Fixed points as phi,z,stability rows."""
    lines = list(header_lines)
    lines.append("# columns=phi,z,stability")
    for fp in points:
        lines.append(
            f"{format_float(fp.point.phi)},{format_float(fp.point.z)},{fp.stability}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
