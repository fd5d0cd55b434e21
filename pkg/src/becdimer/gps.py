"""Global-phase-space maps of quantum and semiclassical observables.

A map samples an observable on a cell-centered (phi, z) grid covering
[0, 2 pi) x (-1, 1); the poles are never sampled, so every grid point is
a valid coherent-state label. One spectral decomposition per parameter
set is shared by all grid points, all window samples and all movie
frames. Work is distributed by statically partitioning grid rows across
workers, and every cell is computed by the same single-point pipeline,
so results are bit-for-bit independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import multiprocessing
import numpy as np

from . import lida
from .meanfield import PhasePoint, TWO_PI
from .quantum import (
    ModelParams,
    NoMeanSpinError,
    Spectrum,
    build_hamiltonian,
    coherent_state,
    condensate_fraction,
    diagonalize,
    entanglement_semiclassical,
    epr_entanglement,
    evolve,
    max_overlap,
    mean_imbalance,
    spdm,
    spin_moments,
    squeezing_xi2,
)

__all__ = [
    "MAP_OBSERVABLES",
    "GridSpec",
    "FieldMap",
    "Section",
    "point_observables",
    "quantum_series",
    "min_c_quantum",
    "scan_quantum",
    "scan_min_window",
    "symmetry_maps",
    "section",
    "movie_frames",
]

MAP_OBSERVABLES = ("c", "E", "E_sc", "xi2", "A_max")


@dataclass(frozen=True)
class GridSpec:
    """Cell-centered grid: nphi columns over [0, 2 pi), nz rows over (-1, 1)."""

    nphi: int
    nz: int

    def __post_init__(self):
        if self.nphi < 2 or self.nz < 2:
            raise ValueError("grid must be at least 2x2")

    @property
    def phi_values(self) -> np.ndarray:
        i = np.arange(self.nphi)
        return (2 * i + 1) * (np.pi / self.nphi)

    @property
    def z_values(self) -> np.ndarray:
        # integer numerators make the grid exactly symmetric under z -> -z
        j = np.arange(self.nz)
        return (2 * j + 1 - self.nz) / self.nz


@dataclass(frozen=True)
class FieldMap:
    """Observable values on a grid, with the metadata that produced them."""

    grid: GridSpec
    observable: str
    values: np.ndarray
    params: ModelParams
    tau: float | None = None
    window: float | None = None
    dt_sample: float | None = None
    engine: str = "quantum"
    seed: int | None = None
    M: int | None = None


@dataclass(frozen=True)
class Section:
    """One grid column: the profile of a map along its nearest column to phi0."""

    phi: float
    z_values: np.ndarray
    values: np.ndarray
    observable: str


def point_observables(phi: float, z: float, params: ModelParams, spec: Spectrum,
                      tau: float, observables) -> dict[str, float]:
    """Single-point quantum pipeline: coherent state, evolve, measure.

    xi2 is NaN where the mean spin vanishes. A_max ignores tau.
    """
    psi0 = coherent_state(params.N, phi, z)
    psi = evolve(psi0, tau, spec)
    out = {}
    c = None
    if "c" in observables or "E_sc" in observables:
        c = condensate_fraction(spdm(psi))
    for name in observables:
        if name == "c":
            out[name] = c
        elif name == "E":
            out[name] = epr_entanglement(psi)
        elif name == "E_sc":
            out[name] = entanglement_semiclassical(c, params.N)
        elif name == "xi2":
            try:
                out[name] = squeezing_xi2(spin_moments(psi), params.N)
            except NoMeanSpinError:
                out[name] = float("nan")
        elif name == "A_max":
            out[name] = max_overlap(phi, z, spec)
        elif name == "mean_z":
            out[name] = mean_imbalance(psi)
        else:
            raise ValueError(f"unknown observable: {name}")
    return out


def quantum_series(params: ModelParams, phi: float, z: float, times,
                   observables, spec: Spectrum | None = None) -> dict[str, np.ndarray]:
    """Observables of one initial coherent state at a sequence of times."""
    if spec is None:
        spec = diagonalize(build_hamiltonian(params))
    times = np.asarray(times, dtype=float)
    out = {name: np.empty(times.size) for name in observables}
    for k, t in enumerate(times):
        vals = point_observables(phi, z, params, spec, float(t), observables)
        for name in observables:
            out[name][k] = vals[name]
    return out


def min_c_quantum(phi: float, z: float, params: ModelParams, spec: Spectrum,
                  window: float, dt_sample: float = 0.01) -> float:
    """Minimum quantum condensate fraction over the sampled window [0, window]."""
    times = lida.sample_times(window, dt_sample)
    best = np.inf
    for t in times:
        vals = point_observables(phi, z, params, spec, float(t), ("c",))
        best = min(best, vals["c"])
    return float(best)


class _ScanRows:
    """Compute full grid rows of a tau scan; used by every worker identically."""

    def __init__(self, grid, params, spec, tau, observables):
        self.grid = grid
        self.params = params
        self.spec = spec
        self.tau = tau
        self.observables = observables

    def __call__(self, rows):
        phis = self.grid.phi_values
        zs = self.grid.z_values
        block = np.empty((len(self.observables), len(rows), self.grid.nz))
        for a, i in enumerate(rows):
            for j in range(self.grid.nz):
                vals = point_observables(
                    phis[i], zs[j], self.params, self.spec, self.tau, self.observables
                )
                for b, name in enumerate(self.observables):
                    block[b, a, j] = vals[name]
        return block


class _MinWindowRows:
    def __init__(self, grid, params, spec, window, dt_sample, engine, M, seed, dt, J):
        self.grid = grid
        self.params = params
        self.spec = spec
        self.window = window
        self.dt_sample = dt_sample
        self.engine = engine
        self.M = M
        self.seed = seed
        self.dt = dt
        self.J = J

    def __call__(self, rows):
        phis = self.grid.phi_values
        zs = self.grid.z_values
        block = np.empty((len(rows), self.grid.nz))
        for a, i in enumerate(rows):
            for j in range(self.grid.nz):
                if self.engine == "quantum":
                    block[a, j] = min_c_quantum(
                        phis[i], zs[j], self.params, self.spec, self.window, self.dt_sample
                    )
                else:
                    block[a, j] = lida.lida_min_c_window(
                        PhasePoint(phis[i], zs[j]), self.params.N, self.params.lam,
                        self.window, self.dt_sample, self.M,
                        lida.derive_seed(self.seed, i * self.grid.nz + j),
                        self.dt, self.J,
                    )
        return block


def _map_row_chunks(func, nphi: int, workers: int):
    """Static partition of row indices; reassembles blocks in row order."""
    rows = np.arange(nphi)
    if workers <= 1:
        return [func(rows)]
    chunks = [c for c in np.array_split(rows, workers) if c.size]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=len(chunks), mp_context=ctx) as pool:
        return list(pool.map(func, chunks))


def scan_quantum(grid: GridSpec, params: ModelParams, tau: float, observables=("c",),
                 workers: int = 1, spec: Spectrum | None = None) -> dict[str, FieldMap]:
    """Quantum observable maps at evolution time tau over the full grid."""
    observables = tuple(observables)
    for name in observables:
        if name not in MAP_OBSERVABLES:
            raise ValueError(f"unknown observable: {name}")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if spec is None:
        spec = diagonalize(build_hamiltonian(params))
    blocks = _map_row_chunks(_ScanRows(grid, params, spec, tau, observables), grid.nphi, workers)
    stacked = np.concatenate(blocks, axis=1)
    return {
        name: FieldMap(grid=grid, observable=name, values=stacked[b], params=params, tau=tau)
        for b, name in enumerate(observables)
    }


def scan_min_window(grid: GridSpec, params: ModelParams, window: float,
                    dt_sample: float = 0.01, engine: str = "quantum",
                    workers: int = 1, M: int = 10000, seed: int = 0,
                    dt: float = 1e-4, spec: Spectrum | None = None) -> FieldMap:
    """Map of the minimum condensate fraction over the window [0, window]."""
    if engine not in ("quantum", "lida"):
        raise ValueError(f"unknown engine: {engine}")
    if window < 0:
        raise ValueError("window must be nonnegative")
    if engine == "quantum" and spec is None:
        spec = diagonalize(build_hamiltonian(params))
    func = _MinWindowRows(grid, params, spec, window, dt_sample, engine, M, seed, dt, params.J)
    blocks = _map_row_chunks(func, grid.nphi, workers)
    values = np.concatenate(blocks, axis=0)
    return FieldMap(
        grid=grid, observable="min_c", values=values, params=params,
        window=window, dt_sample=dt_sample, engine=engine,
        seed=seed if engine == "lida" else None,
        M=M if engine == "lida" else None,
    )


def _check_reflection_closed(grid: GridSpec):
    phis = grid.phi_values
    zs = grid.z_values
    if not np.allclose((-phis[::-1]) % TWO_PI, phis, atol=1e-9):
        raise ValueError("grid phi values are not closed under negation mod 2 pi")
    if not np.allclose(-zs[::-1], zs, atol=1e-12):
        raise ValueError("grid z values are not closed under z -> -z")


def symmetry_maps(f: FieldMap) -> tuple[FieldMap, FieldMap]:
    """Symmetry residuals of a map.

    First: breaking of the symmetry (phi, z) -> (phi, -z),
    Delta(phi, z) = f(phi, z) - f(phi, -z). Second: residual of the
    mode-relabeling symmetry (phi, z) -> (-phi, -z), which any engine
    respecting the exchange of the two wells must send to zero.
    """
    _check_reflection_closed(f.grid)
    v = f.values
    ds = FieldMap(
        grid=f.grid, observable=f"dS({f.observable})", values=v - v[:, ::-1],
        params=f.params, tau=f.tau, window=f.window, dt_sample=f.dt_sample,
        engine=f.engine, seed=f.seed, M=f.M,
    )
    relabel = FieldMap(
        grid=f.grid, observable=f"relabel({f.observable})", values=v - v[::-1, ::-1],
        params=f.params, tau=f.tau, window=f.window, dt_sample=f.dt_sample,
        engine=f.engine, seed=f.seed, M=f.M,
    )
    return ds, relabel


def section(f: FieldMap, phi0: float) -> Section:
    """Profile of the map along the grid column nearest to phi0."""
    phis = f.grid.phi_values
    d = np.abs((phis - phi0 + np.pi) % TWO_PI - np.pi)
    i = int(np.argmin(d))
    return Section(
        phi=float(phis[i]), z_values=f.grid.z_values.copy(),
        values=f.values[i].copy(), observable=f.observable,
    )


def movie_frames(grid: GridSpec, params: ModelParams, t_end: float = 3.0,
                 dt_frame: float = 0.025, observable: str = "c",
                 workers: int = 1, spec: Spectrum | None = None) -> list[FieldMap]:
    """Maps at t = 0, dt_frame, ..., t_end sharing one diagonalization.

    Each frame equals scan_quantum at that time bit-for-bit.
    """
    if dt_frame <= 0:
        raise ValueError("dt_frame must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if spec is None:
        spec = diagonalize(build_hamiltonian(params))
    n = int(np.floor(t_end / dt_frame + 1e-9))
    frames = []
    for k in range(n + 1):
        tau = k * dt_frame
        frames.append(scan_quantum(grid, params, tau, (observable,), workers, spec)[observable])
    return frames
